//! Built-in pre/post-selection scenarios: the three-box setup, Hardy's
//! electron-positron interferometer pair, and a single Mach-Zehnder
//! interferometer with a general second beam splitter.
//!
//! Arm and port bases are kept separate. A beam splitter is the unitary
//! mapping the arm basis `(I, N)` onto the port basis `(B, D)`:
//!
//! ```text
//! |I⟩ → q|B⟩ + i·r·e^{iβ}|D⟩
//! |N⟩ → i·r·e^{−iβ}|B⟩ + q|D⟩
//! ```

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

use crate::hilbert::{
    tensor, tensor_op, Basis, HilbertError, OperatorMatrix, StateVector, C64, DEFAULT_TOL,
};
use crate::measure::{
    abl_probability, number_operator, weak_value, ABLDistribution, MeasureError, PrePost,
    SpectralData,
};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Measure(#[from] MeasureError),

    #[error("beam splitter violates q² + r² = 1 (q = {q}, r = {r})")]
    NotUnitary { q: f64, r: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl From<HilbertError> for ScenarioError {
    fn from(e: HilbertError) -> Self {
        Self::Measure(e.into())
    }
}

pub type ScenarioResult<T> = Result<T, ScenarioError>;

/// A value computed for one query, or the reason it is undefined.
pub type Entry<T> = Result<T, MeasureError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSplitter {
    q: f64,
    r: f64,
    beta: f64,
}

impl BeamSplitter {
    pub fn new(q: f64, r: f64, beta: f64) -> ScenarioResult<Self> {
        if !(q.is_finite() && r.is_finite() && beta.is_finite()) {
            return Err(ScenarioError::InvalidParameter(
                "non-finite beam splitter parameter".into(),
            ));
        }
        if !((q * q + r * r - 1.0).abs() <= DEFAULT_TOL) {
            return Err(ScenarioError::NotUnitary { q, r });
        }
        Ok(Self { q, r, beta })
    }

    /// Splitter with transmission amplitude `q ∈ [0, 1]` and `r = √(1 − q²)`.
    pub fn from_q(q: f64, beta: f64) -> ScenarioResult<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(ScenarioError::InvalidParameter(format!(
                "q = {q} is outside [0, 1]"
            )));
        }
        Self::new(q, (1.0 - q * q).sqrt(), beta)
    }

    /// Ideal 50-50 splitter with `β = 0`.
    pub fn balanced() -> Self {
        Self {
            q: FRAC_1_SQRT_2,
            r: FRAC_1_SQRT_2,
            beta: 0.0,
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The splitter as a map from `arms = (I, N)` onto `ports = (B, D)`;
    /// only the label order of the two bases matters.
    pub fn unitary(&self, arms: &Basis, ports: &Basis) -> ScenarioResult<OperatorMatrix> {
        if arms.dim() != 2 || ports.dim() != 2 {
            return Err(ScenarioError::InvalidParameter(
                "beam splitter needs two arms and two ports".into(),
            ));
        }
        let q = C64::new(self.q, 0.0);
        let ir = C64::new(0.0, self.r);
        let entries = vec![
            q,
            ir * C64::from_polar(1.0, -self.beta),
            ir * C64::from_polar(1.0, self.beta),
            q,
        ];
        Ok(OperatorMatrix::new(arms.clone(), ports.clone(), entries)?)
    }

    /// Closed form `q / (q − r·e^{iβ})` of the N-arm weak value at port D.
    pub fn closed_form_n_at_d(&self) -> Option<C64> {
        let d = C64::new(self.q, 0.0) - C64::from_polar(self.r, self.beta);
        (d.norm() > 0.0).then(|| C64::new(self.q, 0.0) / d)
    }

    /// Closed form `r / (r + q·e^{iβ})` of the N-arm weak value at port B.
    pub fn closed_form_n_at_b(&self) -> Option<C64> {
        let d = C64::new(self.r, 0.0) + C64::from_polar(self.q, self.beta);
        (d.norm() > 0.0).then(|| C64::new(self.r, 0.0) / d)
    }

    /// `q(q − r cos β) / (1 − 2qr cos β)`, the real part of
    /// [`closed_form_n_at_d`](Self::closed_form_n_at_d).
    pub fn closed_form_re_n_at_d(&self) -> Option<f64> {
        let cb = self.beta.cos();
        let d = 1.0 - 2.0 * self.q * self.r * cb;
        (d.abs() > 0.0).then(|| self.q * (self.q - self.r * cb) / d)
    }
}

/// Results of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub weak_values: BTreeMap<String, Entry<C64>>,
    pub abl: BTreeMap<String, Entry<ABLDistribution>>,
    /// Diagnostic amplitudes keyed by basis label.
    pub amplitudes: BTreeMap<String, C64>,
    pub post_selection_probability: Option<f64>,
    pub notes: Vec<String>,
    /// Keys of `weak_values` whose operators form a complete projector family.
    pub families: Vec<Vec<String>>,
}

impl ScenarioReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            weak_values: BTreeMap::new(),
            abl: BTreeMap::new(),
            amplitudes: BTreeMap::new(),
            post_selection_probability: None,
            notes: Vec::new(),
            families: Vec::new(),
        }
    }

    /// Weak value for `key`, if present and defined.
    pub fn weak(&self, key: &str) -> Option<C64> {
        self.weak_values
            .get(key)
            .and_then(|e| e.as_ref().ok())
            .copied()
    }

    /// ABL probability of outcome 1 for `key`, if present and defined.
    pub fn abl_one(&self, key: &str) -> Option<f64> {
        self.abl
            .get(key)
            .and_then(|e| e.as_ref().ok())
            .map(|d| d.probability_of(1.0))
    }

    /// Sum of the weak values of a family, `None` if any member is missing
    /// or undefined.
    pub fn family_sum(&self, family: &[String]) -> Option<C64> {
        family.iter().map(|k| self.weak(k)).sum()
    }

    /// Human-readable checks of the sum rule and ABL normalization at `tol`.
    pub fn self_check(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for family in &self.families {
            let names = family.join(" + ");
            match self.family_sum(family) {
                Some(sum) => {
                    let dev = (sum - C64::new(1.0, 0.0)).norm();
                    let verdict = if dev <= tol { "ok" } else { "FAILED" };
                    out.push(format!(
                        "sum rule {names} = 1: {verdict} (deviation {dev:.3e}, tol {tol:.1e})"
                    ));
                }
                None => out.push(format!(
                    "sum rule {names} = 1: skipped (undefined weak value)"
                )),
            }
        }
        for (key, entry) in &self.abl {
            if let Ok(d) = entry {
                let dev = (d.total() - 1.0).abs();
                if dev > tol {
                    out.push(format!(
                        "ABL distribution {key} sums to {} (tol {tol:.1e})",
                        d.total()
                    ));
                }
            }
        }
        out
    }
}

/// A pre/post-selection together with the named observables measured in
/// between.
#[derive(Clone, Debug)]
pub struct Setup {
    pub prepost: PrePost,
    pub observables: BTreeMap<String, OperatorMatrix>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn record(report: &mut ScenarioReport, key: &str, op: &OperatorMatrix, pp: &PrePost) {
    report.weak_values.insert(key.into(), weak_value(op, pp));
    let abl = SpectralData::for_projector(op).and_then(|spec| abl_probability(&spec, pp));
    report.abl.insert(key.into(), abl);
}

fn box_basis() -> Basis {
    Basis::new(["A", "B", "C"]).expect("static labels")
}

pub fn three_box_setup() -> Setup {
    let b = box_basis();
    let pre = StateVector::from_terms(
        &b,
        &[("A", c(1.0, 0.0)), ("B", c(1.0, 0.0)), ("C", c(1.0, 0.0))],
    )
    .expect("static labels");
    let post = StateVector::from_terms(
        &b,
        &[("A", c(1.0, 0.0)), ("B", c(1.0, 0.0)), ("C", c(-1.0, 0.0))],
    )
    .expect("static labels");
    let prepost = PrePost::new(&pre, &post).expect("valid pre/post");
    let observables = ["A", "B", "C"]
        .into_iter()
        .map(|l| (l.to_owned(), number_operator(&b, l).expect("static labels")))
        .collect();
    Setup {
        prepost,
        observables,
    }
}

/// One particle in three boxes, pre-selected in `(|A⟩+|B⟩+|C⟩)/√3` and
/// post-selected in `(|A⟩+|B⟩−|C⟩)/√3`.
pub fn three_box() -> ScenarioReport {
    let setup = three_box_setup();
    let pp = &setup.prepost;
    let mut report = ScenarioReport::new("threebox");
    for (key, op) in &setup.observables {
        record(&mut report, key, op, pp);
    }
    for (label, amp) in pp.pre().basis().labels().iter().zip(pp.pre().amplitudes()) {
        report.amplitudes.insert(format!("in:{label}"), *amp);
    }
    for (label, amp) in pp
        .post()
        .basis()
        .labels()
        .iter()
        .zip(pp.post().amplitudes())
    {
        report.amplitudes.insert(format!("f:{label}"), *amp);
    }
    report.post_selection_probability = Some(pp.overlap().norm_sqr());
    report
        .families
        .push(vec!["A".into(), "B".into(), "C".into()]);
    report
}

struct HardyBases {
    p_arms: Basis,
    e_arms: Basis,
    p_ports: Basis,
    e_ports: Basis,
}

fn hardy_bases() -> HardyBases {
    let basis = |labels: [&str; 2]| Basis::new(labels).expect("static labels");
    HardyBases {
        p_arms: basis(["Ip", "Np"]),
        e_arms: basis(["Ie", "Ne"]),
        p_ports: basis(["Bp", "Dp"]),
        e_ports: basis(["Be", "De"]),
    }
}

/// First-layer splitter: the source port goes to `(|N⟩ + i|I⟩)/√2`.
fn first_splitter(source: &Basis, arms: &Basis) -> OperatorMatrix {
    let h = FRAC_1_SQRT_2;
    // Columns (source, unused input); rows (I, N).
    OperatorMatrix::new(
        source.clone(),
        arms.clone(),
        vec![c(0.0, h), c(h, 0.0), c(h, 0.0), c(0.0, h)],
    )
    .expect("2x2")
}

/// Second-layer splitter used in the Hardy setup:
/// `|N⟩ → (|D⟩ + i|B⟩)/√2`, `|I⟩ → (|B⟩ + i|D⟩)/√2`.
fn hardy_second_splitter(arms: &Basis, ports: &Basis) -> OperatorMatrix {
    let h = FRAC_1_SQRT_2;
    // Rows (B, D); columns (I, N).
    OperatorMatrix::new(
        arms.clone(),
        ports.clone(),
        vec![c(h, 0.0), c(0.0, h), c(0.0, h), c(h, 0.0)],
    )
    .expect("2x2")
}

/// Two-particle state between the splitter layers: both particles pass the
/// first splitters and the `|Ip⟩⊗|Ie⟩` component annihilates with certainty.
pub fn hardy_intermediate_state() -> StateVector {
    let HardyBases { p_arms, e_arms, .. } = hardy_bases();
    let p_src = Basis::new(["p", "p'"]).expect("static labels");
    let e_src = Basis::new(["e", "e'"]).expect("static labels");
    let split = tensor_op(
        &first_splitter(&p_src, &p_arms),
        &first_splitter(&e_src, &e_arms),
    );
    let source = tensor(
        &StateVector::basis_ket(&p_src, "p").expect("static labels"),
        &StateVector::basis_ket(&e_src, "e").expect("static labels"),
    );
    crate::hilbert::apply(&split, &source)
        .and_then(|s| s.without("Ip⊗Ie"))
        .and_then(|s| s.normalize())
        .expect("non-zero after annihilation")
}

fn hardy_setup_with(second_p: OperatorMatrix, second_e: OperatorMatrix) -> ScenarioResult<Setup> {
    let HardyBases {
        p_arms,
        e_arms,
        p_ports,
        e_ports,
    } = hardy_bases();
    let evolution = tensor_op(&second_p, &second_e);
    let post = tensor(
        &StateVector::basis_ket(&p_ports, "Dp")?,
        &StateVector::basis_ket(&e_ports, "De")?,
    );
    let prepost = PrePost::with_evolution(&hardy_intermediate_state(), &post, evolution)?;

    let id_p = OperatorMatrix::identity(&p_arms);
    let id_e = OperatorMatrix::identity(&e_arms);
    let mut observables = BTreeMap::new();
    for p in ["Np", "Ip"] {
        let proj_p = number_operator(&p_arms, p)?;
        observables.insert(p.to_owned(), tensor_op(&proj_p, &id_e));
        for e in ["Ne", "Ie"] {
            let proj_e = number_operator(&e_arms, e)?;
            observables.insert(format!("{p}⊗{e}"), tensor_op(&proj_p, &proj_e));
        }
    }
    for e in ["Ne", "Ie"] {
        observables.insert(
            e.to_owned(),
            tensor_op(&id_p, &number_operator(&e_arms, e)?),
        );
    }
    Ok(Setup {
        prepost,
        observables,
    })
}

pub fn hardy_setup() -> Setup {
    let b = hardy_bases();
    hardy_setup_with(
        hardy_second_splitter(&b.p_arms, &b.p_ports),
        hardy_second_splitter(&b.e_arms, &b.e_ports),
    )
    .expect("fixed Hardy setup is valid")
}

fn hardy_report(setup: &Setup) -> ScenarioReport {
    let pp = &setup.prepost;
    let mut report = ScenarioReport::new("hardy");
    for (key, op) in &setup.observables {
        record(&mut report, key, op, pp);
    }
    let evolved = pp.evolved_pre();
    for (label, amp) in evolved.basis().labels().iter().zip(evolved.amplitudes()) {
        report.amplitudes.insert(label.clone(), *amp);
    }
    report.post_selection_probability = Some(pp.overlap().norm_sqr());
    let pairs = ["Np⊗Ne", "Np⊗Ie", "Ip⊗Ne", "Ip⊗Ie"];
    report
        .families
        .push(pairs.iter().map(|s| s.to_string()).collect());
    report.families.push(vec!["Np".into(), "Ip".into()]);
    report.families.push(vec!["Ne".into(), "Ie".into()]);
    report
}

/// Hardy's setup post-selected on simultaneous clicks at `Dp` and `De`.
pub fn hardy() -> ScenarioReport {
    hardy_report(&hardy_setup())
}

/// Hardy's setup with both second-layer splitters replaced by `bs`.
pub fn hardy_with_splitter(bs: &BeamSplitter) -> ScenarioResult<ScenarioReport> {
    let b = hardy_bases();
    let setup = hardy_setup_with(
        bs.unitary(&b.p_arms, &b.p_ports)?,
        bs.unitary(&b.e_arms, &b.e_ports)?,
    )?;
    Ok(hardy_report(&setup))
}

/// Output port selected after the second splitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Port {
    B,
    D,
}

impl Port {
    pub fn label(self) -> &'static str {
        match self {
            Port::B => "B",
            Port::D => "D",
        }
    }
}

fn mzi_bases() -> (Basis, Basis) {
    (
        Basis::new(["I", "N"]).expect("static labels"),
        Basis::new(["B", "D"]).expect("static labels"),
    )
}

/// Mach-Zehnder setup with pre-selection `(|N⟩ + i|I⟩)/√2` and
/// post-selection on `port`. A dark port is a valid setup; it only shows up
/// when a weak value is requested.
pub fn mzi_setup(bs: &BeamSplitter, port: Port) -> ScenarioResult<Setup> {
    let (arms, ports) = mzi_bases();
    let h = FRAC_1_SQRT_2;
    let pre = StateVector::from_terms(&arms, &[("N", c(h, 0.0)), ("I", c(0.0, h))])?;
    let post = StateVector::basis_ket(&ports, port.label())?;
    let prepost = PrePost::with_evolution(&pre, &post, bs.unitary(&arms, &ports)?)?;
    let observables = ["N", "I"]
        .into_iter()
        .map(|l| Ok((l.to_owned(), number_operator(&arms, l)?)))
        .collect::<ScenarioResult<_>>()?;
    Ok(Setup {
        prepost,
        observables,
    })
}

/// Single interferometer with a 50-50 first splitter and `bs` second.
/// Weak values are keyed `<arm>@<port>`; a dark port yields error entries
/// for that port only.
pub fn mzi(bs: &BeamSplitter) -> ScenarioReport {
    let mut report = ScenarioReport::new("mzi");
    for port in [Port::D, Port::B] {
        let setup = mzi_setup(bs, port).expect("beam splitter is unitary by construction");
        let pp = &setup.prepost;
        for (arm, op) in &setup.observables {
            record(&mut report, &format!("{arm}@{}", port.label()), op, pp);
        }
        if port == Port::D {
            report.post_selection_probability = Some(pp.overlap().norm_sqr());
            let evolved = pp.evolved_pre();
            for (label, amp) in evolved.basis().labels().iter().zip(evolved.amplitudes()) {
                report.amplitudes.insert(label.clone(), *amp);
            }
        }
        report.families.push(vec![
            format!("N@{}", port.label()),
            format!("I@{}", port.label()),
        ]);
    }

    report
        .notes
        .push(format!("q = {}, r = {}, beta = {}", bs.q, bs.r, bs.beta));
    let checks = [
        ("N@D", bs.closed_form_n_at_d(), "q/(q - r e^{i beta})"),
        ("N@B", bs.closed_form_n_at_b(), "r/(r + q e^{i beta})"),
    ];
    for (key, closed, formula) in checks {
        match (report.weak(key), closed) {
            (Some(w), Some(cf)) => report.notes.push(format!(
                "{key} vs {formula}: deviation {:.3e}",
                (w - cf).norm()
            )),
            _ => report
                .notes
                .push(format!("{key}: dark port, weak value undefined")),
        }
    }
    if let (Some(w), Some(re)) = (report.weak("N@D"), bs.closed_form_re_n_at_d()) {
        report.notes.push(format!(
            "Re N@D vs q(q - r cos beta)/(1 - 2qr cos beta): deviation {:.3e}",
            (w.re - re).abs()
        ));
    }
    report
}

fn sweep_grid(q_values: &[f64], beta_values: &[f64]) -> ScenarioResult<Vec<BeamSplitter>> {
    q_values
        .iter()
        .flat_map(|&q| beta_values.iter().map(move |&beta| (q, beta)))
        .map(|(q, beta)| {
            if !(q > 0.0 && q < 1.0) {
                return Err(ScenarioError::InvalidParameter(format!(
                    "sweep q = {q} is outside (0, 1)"
                )));
            }
            BeamSplitter::from_q(q, beta)
        })
        .collect()
}

/// One report per `(q, β)` pair, q-major, in input order.
pub fn mzi_sweep(q_values: &[f64], beta_values: &[f64]) -> ScenarioResult<Vec<ScenarioReport>> {
    Ok(par::map_ordered(&sweep_grid(q_values, beta_values)?, mzi))
}

/// [`mzi_sweep`] without the thread pool.
pub fn mzi_sweep_sequential(
    q_values: &[f64],
    beta_values: &[f64],
) -> ScenarioResult<Vec<ScenarioReport>> {
    Ok(par::map_sequential(
        &sweep_grid(q_values, beta_values)?,
        mzi,
    ))
}

/// Open grid in q (half-step offset, endpoints excluded) and `[0, 2π)` in β.
pub fn sweep_axes(q_steps: usize, beta_steps: usize) -> (Vec<f64>, Vec<f64>) {
    let qs = (0..q_steps)
        .map(|i| (i as f64 + 0.5) / q_steps as f64)
        .collect();
    let betas = (0..beta_steps)
        .map(|j| 2.0 * PI * j as f64 / beta_steps as f64)
        .collect();
    (qs, betas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn three_box_report() {
        let r = three_box();
        assert!(close(r.weak("A").unwrap(), c(1.0, 0.0), 1e-12));
        assert!(close(r.weak("B").unwrap(), c(1.0, 0.0), 1e-12));
        assert!(close(r.weak("C").unwrap(), c(-1.0, 0.0), 1e-12));
        assert!((r.abl_one("A").unwrap() - 1.0).abs() < 1e-12);
        assert!((r.abl_one("B").unwrap() - 1.0).abs() < 1e-12);
        assert!((r.abl_one("C").unwrap() - 0.2).abs() < 1e-12);
        assert!((r.post_selection_probability.unwrap() - 1.0 / 9.0).abs() < 1e-12);
        assert!(r.self_check(1e-10).iter().all(|n| n.contains(": ok")));
    }

    #[test]
    fn hardy_intermediate_matches_closed_form() {
        let s = hardy_intermediate_state();
        let s3 = 1.0 / 3f64.sqrt();
        assert!(close(s.amplitude("Np⊗Ne").unwrap(), c(s3, 0.0), 1e-15));
        assert!(close(s.amplitude("Ip⊗Ne").unwrap(), c(0.0, s3), 1e-15));
        assert!(close(s.amplitude("Np⊗Ie").unwrap(), c(0.0, s3), 1e-15));
        assert_eq!(s.amplitude("Ip⊗Ie").unwrap(), c(0.0, 0.0));
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hardy_report_values() {
        let r = hardy();
        let s12 = 1.0 / 12f64.sqrt();
        assert!(close(r.amplitudes["Dp⊗De"], c(-s12, 0.0), 1e-12));
        assert!(close(r.amplitudes["Dp⊗Be"], c(0.0, s12), 1e-12));
        assert!(close(r.amplitudes["Bp⊗De"], c(0.0, s12), 1e-12));
        assert!(close(r.amplitudes["Bp⊗Be"], c(-3.0 * s12, 0.0), 1e-12));
        assert!((r.post_selection_probability.unwrap() - 1.0 / 12.0).abs() < 1e-12);

        assert!(close(r.weak("Ip⊗Ie").unwrap(), c(0.0, 0.0), 1e-12));
        assert!(close(r.weak("Np⊗Ie").unwrap(), c(1.0, 0.0), 1e-12));
        assert!(close(r.weak("Ip⊗Ne").unwrap(), c(1.0, 0.0), 1e-12));
        assert!(close(r.weak("Np⊗Ne").unwrap(), c(-1.0, 0.0), 1e-12));
        assert!(close(r.weak("Np").unwrap(), c(0.0, 0.0), 1e-12));
        assert!(close(r.weak("Ip").unwrap(), c(1.0, 0.0), 1e-12));
        assert!(r.self_check(1e-10).iter().all(|n| n.contains(": ok")));
    }

    #[test]
    fn hardy_general_splitter_agrees_with_fixed_convention() {
        let fixed = hardy();
        let general = hardy_with_splitter(&BeamSplitter::balanced()).unwrap();
        for (key, w) in &fixed.weak_values {
            assert!(
                close(*w.as_ref().unwrap(), general.weak(key).unwrap(), 1e-14),
                "{key}"
            );
        }
        for (key, a) in &fixed.amplitudes {
            assert!(close(*a, general.amplitudes[key], 1e-14), "{key}");
        }
    }

    #[test]
    fn general_splitter_acts_on_n() {
        let (arms, ports) = mzi_bases();
        let bs = BeamSplitter::new(0.6, 0.8, 0.7).unwrap();
        let u = bs.unitary(&arms, &ports).unwrap();
        let out = u.column("N").unwrap();
        assert!(close(
            out.amplitude("B").unwrap(),
            c(0.0, 0.8) * C64::from_polar(1.0, -0.7),
            1e-15
        ));
        assert!(close(out.amplitude("D").unwrap(), c(0.6, 0.0), 1e-15));
        assert!(crate::hilbert::is_unitary(&u, 1e-12));
    }

    #[test]
    fn beam_splitter_validation() {
        assert!(matches!(
            BeamSplitter::new(0.6, 0.7, 0.0),
            Err(ScenarioError::NotUnitary { .. })
        ));
        assert!(BeamSplitter::from_q(1.2, 0.0).is_err());
        let bs = BeamSplitter::from_q(0.6, 1.0).unwrap();
        assert!((bs.r() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn mzi_examples() {
        let q = 1.0 / 5f64.sqrt();
        let r = mzi(&BeamSplitter::from_q(q, 0.0).unwrap());
        assert!(close(r.weak("N@D").unwrap(), c(-1.0, 0.0), 1e-12));
        assert!((r.abl_one("N@D").unwrap() - 0.2).abs() < 1e-12);

        let r = mzi(&BeamSplitter::balanced());
        assert!(close(r.weak("N@B").unwrap(), c(0.5, 0.0), 1e-12));
        assert!(matches!(
            r.weak_values["N@D"],
            Err(MeasureError::PostSelectionOrthogonal { .. })
        ));

        let r = mzi(&BeamSplitter::from_q(1.0, 0.4).unwrap());
        assert!(close(r.weak("N@D").unwrap(), c(1.0, 0.0), 1e-12));
    }

    #[test]
    fn sweep_order_and_sum_rule() {
        let (qs, betas) = sweep_axes(4, 6);
        let reports = mzi_sweep(&qs, &betas).unwrap();
        assert_eq!(reports.len(), 24);
        let seq = mzi_sweep_sequential(&qs, &betas).unwrap();
        assert_eq!(reports, seq);
        for (k, rep) in reports.iter().enumerate() {
            assert!(rep.notes[0].starts_with(&format!("q = {}", qs[k / 6])));
            for family in &rep.families {
                if let Some(sum) = rep.family_sum(family) {
                    assert!(close(sum, c(1.0, 0.0), 1e-10));
                }
            }
        }
        assert!(mzi_sweep(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn sweep_includes_minus_one_point() {
        let q = 1.0 / 5f64.sqrt();
        let reports = mzi_sweep(&[0.3, q], &[0.0, 1.0]).unwrap();
        assert!(close(reports[2].weak("N@D").unwrap(), c(-1.0, 0.0), 1e-12));
    }
}
