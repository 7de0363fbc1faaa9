//! Time-dependent system Hamiltonian and dissipators.
//!
//! In the interaction picture with the bare cavity term removed,
//!
//! ```text
//! H(t) = -δc(t)|e><e| + gc(|e><g|c + |g><e|c†)
//!        - Σ_i δm_i(t) m_i†m_i + Σ_i gm_i(t)(m_i†c + c†m_i)
//! ```
//!
//! Frequencies and rates are angular (rad per time unit); the model is
//! agnostic to the time unit as long as it is used consistently.

use crate::error::{Error, Result};
use crate::qspace::{
    boson_annihilator, embed, number_operator, two_level_ops, FactorLabel, LocalOp, Operator,
    SpaceLayout, C64,
};

/// Scalar control function of time.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    Linear { from: f64, to: f64, duration: f64 },
    /// `mid + half·tanh(s(2t/T-1))/tanh(s)`; hits `from` and `to` exactly at the ends.
    TanhRamp { from: f64, to: f64, duration: f64, steepness: f64 },
    /// `-δ0(2t/T-1)^2 - δ1`.
    QuadraticPulse { delta0: f64, delta1: f64, duration: f64 },
    /// `peak·sin^2(πt/T)`.
    SineSquared { peak: f64, duration: f64 },
    Piecewise(Vec<Segment>),
}

/// Piece of a [`Schedule::Piecewise`]; the inner schedule sees local time `t - start`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub schedule: Schedule,
}

impl Segment {
    pub fn new(start: f64, end: f64, schedule: Schedule) -> Self {
        Segment { start, end, schedule }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite"))
            }
        };
        match self {
            Schedule::Constant(v) => finite("value", *v),
            Schedule::Linear { from, to, duration } => {
                finite("from", *from)?;
                finite("to", *to)?;
                positive("duration", *duration)
            }
            Schedule::TanhRamp { from, to, duration, steepness } => {
                finite("from", *from)?;
                finite("to", *to)?;
                positive("duration", *duration)?;
                positive("steepness", *steepness)
            }
            Schedule::QuadraticPulse { delta0, delta1, duration } => {
                finite("delta0", *delta0)?;
                finite("delta1", *delta1)?;
                positive("duration", *duration)
            }
            Schedule::SineSquared { peak, duration } => {
                finite("peak", *peak)?;
                positive("duration", *duration)
            }
            Schedule::Piecewise(segs) => {
                if segs.is_empty() {
                    return Err(Error::param("segments", "piecewise schedule needs at least one segment"));
                }
                if segs[0].start != 0.0 {
                    return Err(Error::param("segments", "first segment must start at 0"));
                }
                for w in segs.windows(2) {
                    if w[0].end != w[1].start {
                        return Err(Error::param("segments", "segments must be contiguous"));
                    }
                }
                for s in segs {
                    positive("segment length", s.end - s.start)?;
                    s.schedule.validate()?;
                    if let Some(d) = s.schedule.duration() {
                        if (d - (s.end - s.start)).abs() > 1e-9 * d.max(1.0) {
                            return Err(Error::param("segments", "inner schedule duration does not match segment length"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// `None` for schedules defined at every time.
    pub fn duration(&self) -> Option<f64> {
        match self {
            Schedule::Constant(_) => None,
            Schedule::Linear { duration, .. }
            | Schedule::TanhRamp { duration, .. }
            | Schedule::QuadraticPulse { duration, .. }
            | Schedule::SineSquared { duration, .. } => Some(*duration),
            Schedule::Piecewise(segs) => segs.last().map(|s| s.end),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::Linear { from, to, duration } => from + (to - from) * (t / duration),
            Schedule::TanhRamp { from, to, duration, steepness } => {
                let x = 2.0 * t / duration - 1.0;
                0.5 * (from + to) + 0.5 * (to - from) * (steepness * x).tanh() / steepness.tanh()
            }
            Schedule::QuadraticPulse { delta0, delta1, duration } => {
                let x = 2.0 * t / duration - 1.0;
                -delta0 * x * x - delta1
            }
            Schedule::SineSquared { peak, duration } => {
                let s = (std::f64::consts::PI * t / duration).sin();
                peak * s * s
            }
            Schedule::Piecewise(segs) => {
                let seg = segs
                    .iter()
                    .find(|s| t < s.end)
                    .unwrap_or_else(|| segs.last().expect("validated piecewise schedule"));
                seg.schedule.value(t - seg.start)
            }
        }
    }

    /// Like [`Schedule::value`], but piecewise segments are chosen by `hint`
    /// rather than by `t`. Integrators pass the step midpoint so that stages
    /// landing exactly on a breakpoint see the one-sided limit of the step's
    /// own segment.
    pub fn value_near(&self, t: f64, hint: f64) -> f64 {
        match self {
            Schedule::Piecewise(segs) => {
                let seg = segs
                    .iter()
                    .find(|s| hint < s.end)
                    .unwrap_or_else(|| segs.last().expect("validated piecewise schedule"));
                seg.schedule.value_near(t - seg.start, hint - seg.start)
            }
            _ => self.value(t),
        }
    }

    /// Value with a domain check; a relative slack of 1e-12 is allowed at the ends.
    pub fn value_checked(&self, t: f64) -> Result<f64> {
        if let Some(d) = self.duration() {
            let slack = 1e-12 * d.max(1.0);
            if !(t >= -slack && t <= d + slack) {
                return Err(Error::OutOfRange { t, duration: d });
            }
        }
        Ok(self.value(t))
    }

    /// Interior times where the schedule (or its derivative) may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Schedule::Piecewise(segs) => {
                let mut out = Vec::new();
                for (k, s) in segs.iter().enumerate() {
                    if k > 0 {
                        out.push(s.start);
                    }
                    out.extend(s.schedule.breakpoints().into_iter().map(|b| b + s.start));
                }
                out
            }
            _ => Vec::new(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Schedule::Constant(v) if *v == 0.0)
    }
}

/// Coupling and Raman detuning schedules of one ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleDrive {
    pub coupling: Schedule,
    pub detuning: Schedule,
}

impl Default for EnsembleDrive {
    fn default() -> Self {
        EnsembleDrive { coupling: Schedule::Constant(0.0), detuning: Schedule::Constant(0.0) }
    }
}

/// `scale · schedule(t) · op`.
#[derive(Clone, Debug)]
pub struct HamiltonianTerm {
    pub schedule: Schedule,
    pub scale: f64,
    pub op: Operator,
}

impl HamiltonianTerm {
    pub fn coefficient(&self, t: f64) -> f64 {
        self.scale * self.schedule.value(t)
    }

    pub fn coefficient_near(&self, t: f64, hint: f64) -> f64 {
        self.scale * self.schedule.value_near(t, hint)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub layout: SpaceLayout,
    pub g_c: f64,
    pub cpb_detuning: Schedule,
    /// Drives of ensembles 1 and 2; ignored for ensembles absent from the layout.
    pub ensembles: [EnsembleDrive; 2],
    /// Cavity energy decay rate.
    pub kappa: f64,
    /// Charge-qubit pure dephasing rate, `1/T2`.
    pub gamma_phi: f64,
    /// Charge-qubit relaxation rate (off unless configured).
    pub gamma_1: f64,
}

impl SystemModel {
    pub fn new(layout: SpaceLayout) -> Self {
        SystemModel {
            layout,
            g_c: 0.0,
            cpb_detuning: Schedule::Constant(0.0),
            ensembles: [EnsembleDrive::default(), EnsembleDrive::default()],
            kappa: 0.0,
            gamma_phi: 0.0,
            gamma_1: 0.0,
        }
    }

    pub fn with_g_c(mut self, g_c: f64) -> Self {
        self.g_c = g_c;
        self
    }

    pub fn with_cpb_detuning(mut self, schedule: Schedule) -> Self {
        self.cpb_detuning = schedule;
        self
    }

    /// `index` is 1 or 2.
    pub fn with_ensemble(mut self, index: usize, coupling: Schedule, detuning: Schedule) -> Self {
        assert!(index == 1 || index == 2, "ensemble index must be 1 or 2");
        self.ensembles[index - 1] = EnsembleDrive { coupling, detuning };
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_dephasing(mut self, gamma_phi: f64) -> Self {
        self.gamma_phi = gamma_phi;
        self
    }

    pub fn with_relaxation(mut self, gamma_1: f64) -> Self {
        self.gamma_1 = gamma_1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("gamma_phi", self.gamma_phi), ("gamma_1", self.gamma_1)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("rate must be non-negative, got {v}")));
            }
        }
        if !self.g_c.is_finite() {
            return Err(Error::param("g_c", "must be finite"));
        }
        let mut duration: Option<f64> = None;
        for s in self.schedules() {
            s.validate()?;
            if let Some(d) = s.duration() {
                match duration {
                    None => duration = Some(d),
                    Some(prev) if (prev - d).abs() > 1e-9 * prev.max(1.0) => {
                        return Err(Error::param("schedules", format!("schedules disagree on duration ({prev} vs {d})")));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn schedules(&self) -> impl Iterator<Item = &Schedule> {
        std::iter::once(&self.cpb_detuning)
            .chain(self.ensembles.iter().flat_map(|e| [&e.coupling, &e.detuning]))
    }

    /// Common duration of the bounded schedules, if any.
    pub fn duration(&self) -> Option<f64> {
        self.schedules().filter_map(|s| s.duration()).fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.schedules().flat_map(|s| s.breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn local(&self, label: FactorLabel) -> Option<Result<LocalOp>> {
        let dim = self.layout.dim_of(label).ok()?;
        Some(if label == FactorLabel::Cpb {
            Ok(two_level_ops().0)
        } else {
            boson_annihilator(dim)
        })
    }

    /// The Hamiltonian as a list of fixed operators with scalar time coefficients.
    pub fn hamiltonian_terms(&self) -> Result<Vec<HamiltonianTerm>> {
        let layout = &self.layout;
        let mut terms = Vec::new();
        let cavity = match self.local(FactorLabel::Cavity) {
            Some(a) => Some(embed(&a?, FactorLabel::Cavity, layout)?),
            None => None,
        };
        if layout.contains(FactorLabel::Cpb) {
            let (lower, excited) = two_level_ops();
            let see = embed(&excited, FactorLabel::Cpb, layout)?;
            if !self.cpb_detuning.is_zero() {
                terms.push(HamiltonianTerm { schedule: self.cpb_detuning.clone(), scale: -1.0, op: see });
            }
            if let (Some(c), true) = (&cavity, self.g_c != 0.0) {
                let sge = embed(&lower, FactorLabel::Cpb, layout)?;
                let raise_absorb = sge.adjoint().times(c);
                let op = raise_absorb.plus(&raise_absorb.adjoint());
                terms.push(HamiltonianTerm { schedule: Schedule::Constant(self.g_c), scale: 1.0, op });
            }
        }
        for (i, drive) in self.ensembles.iter().enumerate() {
            let label = FactorLabel::ensemble(i + 1).expect("two ensembles");
            let Some(m) = self.local(label) else { continue };
            let m = embed(&m?, label, layout)?;
            if !drive.detuning.is_zero() {
                let n = embed(&number_operator(layout.dim_of(label)?)?, label, layout)?;
                terms.push(HamiltonianTerm { schedule: drive.detuning.clone(), scale: -1.0, op: n });
            }
            if let (Some(c), false) = (&cavity, drive.coupling.is_zero()) {
                let hop = m.adjoint().times(c);
                let op = hop.plus(&hop.adjoint());
                terms.push(HamiltonianTerm { schedule: drive.coupling.clone(), scale: 1.0, op });
            }
        }
        Ok(terms)
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<Operator> {
        for s in self.schedules() {
            s.value_checked(t)?;
        }
        let mut h = Operator::zeros(&self.layout);
        for term in self.hamiltonian_terms()? {
            h = h.plus(&term.op.scaled(C64::new(term.coefficient(t), 0.0)));
        }
        Ok(h)
    }

    /// `√κ c`, `√(γφ/2) σz`, and `√γ1 |g><e|` for the non-zero rates.
    pub fn collapse_ops(&self) -> Result<Vec<Operator>> {
        self.validate()?;
        let layout = &self.layout;
        let mut ops = Vec::new();
        if self.kappa > 0.0 {
            let a = boson_annihilator(layout.dim_of(FactorLabel::Cavity)?)?;
            ops.push(embed(&a, FactorLabel::Cavity, layout)?.scaled(C64::new(self.kappa.sqrt(), 0.0)));
        }
        if self.gamma_phi > 0.0 {
            let (_, excited) = two_level_ops();
            let see = embed(&excited, FactorLabel::Cpb, layout)?;
            let sz = see.scaled(C64::new(2.0, 0.0)).plus(&Operator::identity(layout).scaled(C64::new(-1.0, 0.0)));
            ops.push(sz.scaled(C64::new((self.gamma_phi / 2.0).sqrt(), 0.0)));
        }
        if self.gamma_1 > 0.0 {
            let (lower, _) = two_level_ops();
            ops.push(embed(&lower, FactorLabel::Cpb, layout)?.scaled(C64::new(self.gamma_1.sqrt(), 0.0)));
        }
        Ok(ops)
    }
}
