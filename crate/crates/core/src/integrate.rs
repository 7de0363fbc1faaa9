//! Schrödinger and Lindblad time evolution.
//!
//! Both equations are integrated on a dense matrix state (a ket is an n×1
//! column) with either Dormand–Prince 5(4) under PI step control or classic
//! fixed-step RK4. Steps never straddle a schedule breakpoint or a sample
//! time, and the integration may run backwards in time.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Schedule, SystemModel};
use crate::qspace::{hermitian_part, DensityMatrix, ExcitationSubspace, Ket, Operator, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Rk45Adaptive,
    /// Classic RK4; the step is `max_step`, shortened evenly to land on stops.
    Rk4Fixed,
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Times at which observables (and optionally states) are recorded.
    pub sample_times: Vec<f64>,
    pub observables: Vec<Observable>,
    pub store_states: bool,
    pub max_steps: usize,
    /// Evolve only within the block of at most this many excitations. Exact
    /// for the models built here; the initial state must lie in the block.
    pub excitation_cap: Option<usize>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            method: Method::Rk45Adaptive,
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_step: f64::INFINITY,
            sample_times: Vec::new(),
            observables: Vec::new(),
            store_states: false,
            max_steps: 20_000_000,
            excitation_cap: None,
        }
    }
}

impl EvolveOptions {
    pub fn rk4(step: f64) -> Self {
        EvolveOptions { method: Method::Rk4Fixed, max_step: step, ..Default::default() }
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_samples(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn with_observable(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.observables.push(Observable { name: name.into(), op });
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.excitation_cap = Some(cap);
        self
    }

    pub fn storing_states(mut self) -> Self {
        self.store_states = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::param("tolerance", "rel_tol and abs_tol must be positive"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::param("max_step", "must be positive"));
        }
        if self.method == Method::Rk4Fixed && !self.max_step.is_finite() {
            return Err(Error::param("max_step", "fixed-step RK4 needs a finite step"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub op: Operator,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct Timeline<S> {
    pub times: Vec<f64>,
    /// One series per observable, aligned with `times`.
    pub series: Vec<(String, Vec<f64>)>,
    /// States at `times`, when requested.
    pub states: Vec<S>,
    pub final_state: S,
    pub stats: SolverStats,
}

impl<S> Timeline<S> {
    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

type Mat = DMatrix<C64>;

/// Sparse matrix as (row, col, value) triplets; every model term has O(n) entries.
#[derive(Clone, Debug)]
struct Sparse {
    entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    fn from_dense(m: &Mat) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        Sparse { entries }
    }

    /// `out += c·S·y`
    fn mul_add(&self, c: C64, y: &Mat, out: &mut Mat) {
        for col in 0..y.ncols() {
            let yc = y.column(col);
            let mut oc = out.column_mut(col);
            for &(i, j, v) in &self.entries {
                oc[i] += c * v * yc[j];
            }
        }
    }
}

/// Model terms restricted to the working space.
struct Generator {
    n: usize,
    constant: Sparse,
    driven: Vec<(Schedule, f64, Sparse)>,
    jumps: Vec<Sparse>,
    /// `½ Σ L†L`.
    decay: Sparse,
}

const NEG_I: C64 = C64::new(0.0, -1.0);

impl Generator {
    fn new(model: &SystemModel, sub: Option<&ExcitationSubspace>) -> Result<Self> {
        let restrict = |m: &Mat| match sub {
            Some(s) => s.restrict_matrix(m),
            None => m.clone(),
        };
        let n = sub.map_or(model.layout.total_dim(), |s| s.dim());
        let mut constant = Mat::zeros(n, n);
        let mut driven = Vec::new();
        for term in model.hamiltonian_terms()? {
            let m = restrict(term.op.matrix());
            match term.schedule {
                Schedule::Constant(v) => constant += m * C64::new(term.scale * v, 0.0),
                s => driven.push((s, term.scale, Sparse::from_dense(&m))),
            }
        }
        let mut decay = Mat::zeros(n, n);
        let mut jumps = Vec::new();
        for l in model.collapse_ops()? {
            let l = restrict(l.matrix());
            decay += l.adjoint() * &l * C64::new(0.5, 0.0);
            jumps.push(Sparse::from_dense(&l));
        }
        Ok(Generator {
            n,
            constant: Sparse::from_dense(&constant),
            driven,
            jumps,
            decay: Sparse::from_dense(&decay),
        })
    }

    /// `out += c·H(t)·y`
    fn apply_h(&self, t: f64, hint: f64, c: C64, y: &Mat, out: &mut Mat) {
        self.constant.mul_add(c, y, out);
        for (s, scale, m) in &self.driven {
            let k = scale * s.value_near(t, hint);
            if k != 0.0 {
                m.mul_add(c * k, y, out);
            }
        }
    }

    fn ket_rhs(&self, t: f64, hint: f64, y: &Mat) -> Mat {
        let mut out = Mat::zeros(self.n, y.ncols());
        self.apply_h(t, hint, NEG_I, y, &mut out);
        out
    }

    fn density_rhs(&self, t: f64, hint: f64, rho: &Mat) -> Mat {
        // H_eff = H - i·decay;  dρ = -i(H_eff ρ - ρ H_eff†) + Σ L ρ L†.
        // ρ is Hermitian, so ρ H_eff† = (H_eff ρ)†.
        let mut a = Mat::zeros(self.n, self.n);
        self.apply_h(t, hint, C64::new(1.0, 0.0), rho, &mut a);
        self.decay.mul_add(NEG_I, rho, &mut a);
        let mut out = (&a - a.adjoint()) * NEG_I;
        for l in &self.jumps {
            // L ρ L† = (L (Lρ)†)†
            let mut b = Mat::zeros(self.n, self.n);
            l.mul_add(C64::new(1.0, 0.0), rho, &mut b);
            let mut c = Mat::zeros(self.n, self.n);
            l.mul_add(C64::new(1.0, 0.0), &b.adjoint(), &mut c);
            out += c.adjoint();
        }
        out
    }
}

fn scaled_norm(err: &Mat, y0: &Mat, y1: &Mat, rtol: f64, atol: f64) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn combo(y: &Mat, h: f64, terms: &[(f64, &Mat)]) -> Mat {
    let mut out = y.clone();
    for &(c, k) in terms {
        if c != 0.0 {
            let f = h * c;
            out.zip_apply(k, |a, b| *a += b * f);
        }
    }
    out
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;

/// Drives `y` from `t0` to `t1` stopping exactly at every entry of `stops`
/// (sorted in the direction of travel, ending with `t1`). `on_stop` is called
/// with the stop index and the state there; `post` is applied after every
/// accepted step.
#[allow(clippy::too_many_arguments)]
fn drive<F, P, O>(
    rhs: F,
    post: P,
    mut y: Mat,
    t0: f64,
    stops: &[f64],
    breaks: &[f64],
    opts: &EvolveOptions,
    mut on_stop: O,
) -> Result<(Mat, SolverStats)>
where
    F: Fn(f64, f64, &Mat) -> Mat,
    P: Fn(&mut Mat),
    O: FnMut(usize, &Mat) -> Result<()>,
{
    let mut stats = SolverStats::default();
    let t1 = *stops.last().expect("at least the end time");
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    // Every place a step must end: sample times, the end, and breakpoints in between.
    let mut targets: Vec<(f64, Option<usize>)> = stops.iter().enumerate().map(|(i, &t)| (t, Some(i))).collect();
    for &b in breaks {
        if (b - t0) * dir > 0.0 && (t1 - b) * dir > 0.0 {
            targets.push((b, None));
        }
    }
    targets.sort_by(|a, b| (dir * a.0).total_cmp(&(dir * b.0)));

    let mut t = t0;
    let span = (t1 - t0).abs();
    let tiny = 1e-13 * t0.abs().max(t1.abs()).max(1.0);
    match opts.method {
        Method::Rk4Fixed => {
            for &(target, stop) in &targets {
                let len = (target - t) * dir;
                if len > tiny {
                    let n = (len / opts.max_step).ceil().max(1.0) as usize;
                    for k in 0..n {
                        let ta = t + (target - t) * k as f64 / n as f64;
                        let tb = if k + 1 == n { target } else { t + (target - t) * (k + 1) as f64 / n as f64 };
                        let h = tb - ta;
                        let mid = ta + 0.5 * h;
                        let k1 = rhs(ta, mid, &y);
                        let k2 = rhs(ta + 0.5 * h, mid, &combo(&y, h, &[(0.5, &k1)]));
                        let k3 = rhs(ta + 0.5 * h, mid, &combo(&y, h, &[(0.5, &k2)]));
                        let k4 = rhs(tb, mid, &combo(&y, h, &[(1.0, &k3)]));
                        y = combo(&y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
                        post(&mut y);
                        stats.evaluations += 4;
                        stats.accepted += 1;
                        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                            return Err(Error::NonFinite { t: tb });
                        }
                        if stats.accepted > opts.max_steps {
                            return Err(Error::MaxStepsExceeded { t: tb, max_steps: opts.max_steps });
                        }
                    }
                    t = target;
                }
                if let Some(i) = stop {
                    on_stop(i, &y)?;
                }
            }
        }
        Method::Rk45Adaptive => {
            let max_step = opts.max_step.min(span.max(tiny));
            // Initial step from the scale of the derivative.
            let f0 = rhs(t0, t0, &y);
            stats.evaluations += 1;
            let d0 = scaled_norm(&y, &y, &y, opts.rel_tol, opts.abs_tol);
            let d1 = scaled_norm(&f0, &y, &y, opts.rel_tol, opts.abs_tol);
            let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            h = h.min(max_step).max(tiny);
            let mut err_old: f64 = 1e-4;
            let mut k1: Option<Mat> = None;
            for &(target, stop) in &targets {
                while (target - t) * dir > tiny {
                    let remaining = (target - t) * dir;
                    let (step, lands) = if h >= remaining { (remaining, true) } else { (h, false) };
                    let hs = dir * step;
                    let mid = t + 0.5 * hs;
                    let ka = match k1.take() {
                        Some(k) => k,
                        None => {
                            stats.evaluations += 1;
                            rhs(t, mid, &y)
                        }
                    };
                    let k2 = rhs(t + C2 * hs, mid, &combo(&y, hs, &[(A21, &ka)]));
                    let k3 = rhs(t + C3 * hs, mid, &combo(&y, hs, &[(A31, &ka), (A32, &k2)]));
                    let k4 = rhs(t + C4 * hs, mid, &combo(&y, hs, &[(A41, &ka), (A42, &k2), (A43, &k3)]));
                    let k5 = rhs(t + C5 * hs, mid, &combo(&y, hs, &[(A51, &ka), (A52, &k2), (A53, &k3), (A54, &k4)]));
                    let t_new = if lands { target } else { t + hs };
                    let k6 = rhs(t_new, mid, &combo(&y, hs, &[(A61, &ka), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
                    let y_new = combo(&y, hs, &[(B1, &ka), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
                    let k7 = rhs(t_new, mid, &y_new);
                    stats.evaluations += 6;
                    let mut err_m = ka.clone() * C64::new(E1, 0.0);
                    for (c, k) in [(E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)] {
                        err_m.zip_apply(k, |a, b| *a += b * c);
                    }
                    err_m *= C64::new(hs, 0.0);
                    let err = scaled_norm(&err_m, &y, &y_new, opts.rel_tol, opts.abs_tol);
                    if !err.is_finite() {
                        return Err(Error::NonFinite { t });
                    }
                    if err <= 1.0 {
                        let fac11 = err.powf(0.2 - 0.75 * BETA);
                        let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(0.2, 5.0);
                        let h_next = (step / fac).min(max_step);
                        err_old = err.max(1e-4);
                        y = y_new;
                        post(&mut y);
                        t = t_new;
                        stats.accepted += 1;
                        // FSAL is valid unless the step ended on a target, where
                        // the generator may jump or `post` altered the state.
                        if !lands {
                            k1 = Some(k7);
                            h = h_next;
                        } else {
                            // keep the controller's proposal, not the clipped step
                            h = h.max(h_next).min(max_step);
                        }
                        if stats.accepted > opts.max_steps {
                            return Err(Error::MaxStepsExceeded { t, max_steps: opts.max_steps });
                        }
                    } else {
                        stats.rejected += 1;
                        let fac11 = err.powf(0.2 - 0.75 * BETA);
                        h = step / (fac11 / SAFETY).min(5.0);
                        k1 = Some(ka);
                        if h < tiny {
                            return Err(Error::StepSizeUnderflow { t, h, err_norm: err });
                        }
                    }
                }
                t = target;
                k1 = None;
                if let Some(i) = stop {
                    on_stop(i, &y)?;
                }
            }
        }
    }
    Ok((y, stats))
}

struct Setup {
    gen: Generator,
    sub: Option<ExcitationSubspace>,
    observables: Vec<(String, Mat)>,
    stops: Vec<f64>,
    /// Whether the last stop is an added end time rather than a sample.
    extra_end: bool,
    breaks: Vec<f64>,
}

fn setup(model: &SystemModel, t0: f64, t1: f64, opts: &EvolveOptions) -> Result<Setup> {
    opts.validate()?;
    model.validate()?;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::param("time", "start and end times must be finite"));
    }
    if let Some(d) = model.duration() {
        let slack = 1e-12 * d.max(1.0);
        for t in [t0, t1] {
            if t < -slack || t > d + slack {
                return Err(Error::OutOfRange { t, duration: d });
            }
        }
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let (lo, hi) = if dir > 0.0 { (t0, t1) } else { (t1, t0) };
    let mut prev = t0;
    for &s in &opts.sample_times {
        if s < lo || s > hi {
            return Err(Error::param("sample_times", format!("{s} outside [{lo}, {hi}]")));
        }
        if (s - prev) * dir < 0.0 {
            return Err(Error::param("sample_times", "must be sorted in the direction of integration"));
        }
        prev = s;
    }
    let sub = opts.excitation_cap.map(|cap| ExcitationSubspace::new(&model.layout, cap));
    let gen = Generator::new(model, sub.as_ref())?;
    let mut observables = Vec::new();
    for o in &opts.observables {
        if o.op.layout() != &model.layout {
            return Err(Error::Precondition(format!("observable `{}` has a different layout", o.name)));
        }
        let m = match &sub {
            Some(s) => s.restrict_matrix(o.op.matrix()),
            None => o.op.matrix().clone(),
        };
        observables.push((o.name.clone(), m));
    }
    let mut stops = opts.sample_times.clone();
    let extra_end = stops.last() != Some(&t1);
    if extra_end {
        stops.push(t1);
    }
    Ok(Setup { gen, sub, observables, stops, extra_end, breaks: model.breakpoints() })
}

fn check_inside(sub: &ExcitationSubspace, outside: f64) -> Result<()> {
    if outside > 1e-12 {
        return Err(Error::Precondition(format!(
            "initial state has weight {outside:.3e} above the excitation cap (subspace dim {})",
            sub.dim()
        )));
    }
    Ok(())
}

pub fn evolve_ket(model: &SystemModel, psi0: &Ket, duration: f64, opts: &EvolveOptions) -> Result<Timeline<Ket>> {
    evolve_ket_between(model, psi0, 0.0, duration, opts)
}

/// Propagates `psi0` from `t0` to `t1`; `t1 < t0` runs backwards.
pub fn evolve_ket_between(
    model: &SystemModel,
    psi0: &Ket,
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<Timeline<Ket>> {
    if psi0.layout() != &model.layout {
        return Err(Error::Precondition("initial ket and model have different layouts".into()));
    }
    psi0.check_normalized(1e-8)?;
    let s = setup(model, t0, t1, opts)?;
    let full = psi0.amplitudes();
    let y0 = match &s.sub {
        Some(sub) => {
            let inside = sub.restrict_vector(full);
            check_inside(sub, (full.norm_squared() - inside.norm_squared()).max(0.0).sqrt())?;
            inside
        }
        None => full.clone(),
    };
    let n = y0.len();
    let y0 = Mat::from_column_slice(n, 1, y0.as_slice());
    let lift = |y: &Mat| -> Ket {
        let v = nalgebra::DVector::from_column_slice(y.as_slice());
        let v = match &s.sub {
            Some(sub) => sub.embed_vector(&v),
            None => v,
        };
        Ket::from_amplitudes(model.layout.clone(), v).expect("dimension preserved")
    };
    let n_samples = opts.sample_times.len();
    let mut series: Vec<(String, Vec<f64>)> = s.observables.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
    let mut states = Vec::new();
    let (y, stats) = drive(
        |t, hint, y| s.gen.ket_rhs(t, hint, y),
        |_| {},
        y0,
        t0,
        &s.stops,
        &s.breaks,
        opts,
        |i, y| {
            if i < n_samples {
                for ((_, m), (_, out)) in s.observables.iter().zip(series.iter_mut()) {
                    let v = (y.adjoint() * m * y)[(0, 0)].re;
                    out.push(v);
                }
                if opts.store_states {
                    states.push(lift(y));
                }
            }
            Ok(())
        },
    )?;
    debug_assert!(s.extra_end || n_samples > 0);
    Ok(Timeline { times: opts.sample_times.clone(), series, states, final_state: lift(&y), stats })
}

pub fn evolve_density(
    model: &SystemModel,
    rho0: &DensityMatrix,
    duration: f64,
    opts: &EvolveOptions,
) -> Result<Timeline<DensityMatrix>> {
    evolve_density_between(model, rho0, 0.0, duration, opts)
}

pub fn evolve_density_between(
    model: &SystemModel,
    rho0: &DensityMatrix,
    t0: f64,
    t1: f64,
    opts: &EvolveOptions,
) -> Result<Timeline<DensityMatrix>> {
    if rho0.layout() != &model.layout {
        return Err(Error::Precondition("initial state and model have different layouts".into()));
    }
    rho0.validate()?;
    let s = setup(model, t0, t1, opts)?;
    let y0 = match &s.sub {
        Some(sub) => {
            check_inside(sub, sub.outside_weight(rho0.matrix()))?;
            sub.restrict_matrix(rho0.matrix())
        }
        None => rho0.matrix().clone(),
    };
    let lift = |y: &Mat| -> DensityMatrix {
        let m = match &s.sub {
            Some(sub) => sub.embed_matrix(y),
            None => y.clone(),
        };
        DensityMatrix::from_matrix(model.layout.clone(), m).expect("dimension preserved")
    };
    let n_samples = opts.sample_times.len();
    let mut series: Vec<(String, Vec<f64>)> = s.observables.iter().map(|(n, _)| (n.clone(), Vec::new())).collect();
    let mut states = Vec::new();
    let (y, stats) = drive(
        |t, hint, y| s.gen.density_rhs(t, hint, y),
        |y| *y = hermitian_part(y),
        y0,
        t0,
        &s.stops,
        &s.breaks,
        opts,
        |i, y| {
            if i < n_samples {
                for ((_, m), (_, out)) in s.observables.iter().zip(series.iter_mut()) {
                    out.push(crate::qspace::trace_product(m, y).re);
                }
                if opts.store_states {
                    states.push(lift(y));
                }
            }
            Ok(())
        },
    )?;
    Ok(Timeline { times: opts.sample_times.clone(), series, states, final_state: lift(&y), stats })
}
