//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use weakval::dsl;
use weakval::hilbert::{projector_onto, Basis, OperatorMatrix, StateVector};
use weakval::measure::{
    abl_from_weak, abl_probability, weak_from_abl, weak_value, PrePost, SpectralData,
};
use weakval::meter::{simulate_pointer, weak_shift_ratio, PointerModel};
use weakval::scenarios::{self, BeamSplitter};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn close_c(what: &str, got: C64, want: C64, tol: f64) -> Check {
    let d = (got - want).norm();
    if d <= tol {
        Ok(())
    } else {
        Err(format!(
            "{what}: got {got}, want {want} (|diff| = {d:.3e} > {tol:.0e})"
        ))
    }
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Check {
    close_c(what, c(got, 0.0), c(want, 0.0), tol)
}

fn need<T>(what: &str, v: Option<T>) -> Result<T, String> {
    v.ok_or_else(|| format!("{what}: undefined"))
}

fn three_box_weak() -> Check {
    let r = scenarios::three_box();
    let mut sum = c(0.0, 0.0);
    for (op, want) in [("A", 1.0), ("B", 1.0), ("C", -1.0)] {
        let w = need(op, r.weak(op))?;
        close_c(op, w, c(want, 0.0), 1e-10)?;
        sum += w;
    }
    close_c("A + B + C", sum, c(1.0, 0.0), 1e-10)
}

fn three_box_abl() -> Check {
    let r = scenarios::three_box();
    for (op, want) in [("A", 1.0), ("B", 1.0), ("C", 0.2)] {
        close(op, need(op, r.abl_one(op))?, want, 1e-10)?;
    }
    Ok(())
}

fn hardy_amplitudes() -> Check {
    let r = scenarios::hardy();
    let s = 12f64.sqrt();
    for (label, want) in [
        ("Dp⊗De", c(-1.0, 0.0)),
        ("Dp⊗Be", c(0.0, 1.0)),
        ("Bp⊗De", c(0.0, 1.0)),
        ("Bp⊗Be", c(-3.0, 0.0)),
    ] {
        let got = need(label, r.amplitudes.get(label).copied())?;
        close_c(label, got, want / s, 1e-10)?;
    }
    close(
        "post-selection probability",
        need("post-selection probability", r.post_selection_probability)?,
        1.0 / 12.0,
        1e-10,
    )
}

fn hardy_weak() -> Check {
    let r = scenarios::hardy();
    let mut sum = c(0.0, 0.0);
    for (key, want) in [
        ("Ip⊗Ie", 0.0),
        ("Np⊗Ie", 1.0),
        ("Ip⊗Ne", 1.0),
        ("Np⊗Ne", -1.0),
    ] {
        let w = need(key, r.weak(key))?;
        close_c(key, w, c(want, 0.0), 1e-10)?;
        sum += w;
    }
    close_c("pair sum", sum, c(1.0, 0.0), 1e-10)
}

fn mzi_point() -> Check {
    let q = 1.0 / 5f64.sqrt();
    let bs = BeamSplitter::new(q, 2.0 * q, 0.0).map_err(|e| e.to_string())?;
    let r = scenarios::mzi(&bs);
    close_c("N@D", need("N@D", r.weak("N@D"))?, c(-1.0, 0.0), 1e-10)?;
    close(
        "ABL(N = 1 | D)",
        need("ABL", r.abl_one("N@D"))?,
        q * q,
        1e-10,
    )?;
    close("q²", q * q, 0.2, 1e-10)
}

fn mzi_grid() -> Check {
    let (qs, betas) = scenarios::sweep_axes(10, 10);
    let reports = scenarios::mzi_sweep(&qs, &betas).map_err(|e| e.to_string())?;
    if reports.len() != 100 {
        return Err(format!("expected 100 grid points, got {}", reports.len()));
    }
    let grid = qs.iter().flat_map(|&q| betas.iter().map(move |&b| (q, b)));
    let mut compared = 0;
    for ((q, beta), r) in grid.zip(&reports) {
        let bs = BeamSplitter::from_q(q, beta).map_err(|e| e.to_string())?;
        let at = format!("q = {q}, beta = {beta}");
        if let (Some(w), Some(cf)) = (r.weak("N@D"), bs.closed_form_n_at_d()) {
            close_c(&format!("N@D at {at}"), w, cf, 1e-10)?;
            let re = need("Re closed form", bs.closed_form_re_n_at_d())?;
            close(&format!("Re N@D at {at}"), cf.re, re, 1e-10)?;
            compared += 1;
        }
        if let (Some(w), Some(cf)) = (r.weak("N@B"), bs.closed_form_n_at_b()) {
            close_c(&format!("N@B at {at}"), w, cf, 1e-10)?;
            compared += 1;
        }
    }
    if compared == 0 {
        return Err("no grid point compared".into());
    }
    Ok(())
}

fn random_state(rng: &mut ChaCha8Rng, basis: &Basis, real: bool) -> StateVector {
    loop {
        let amps = (0..basis.dim())
            .map(|_| {
                c(
                    rng.gen_range(-1.0..1.0),
                    if real { 0.0 } else { rng.gen_range(-1.0..1.0) },
                )
            })
            .collect();
        let s = StateVector::new(basis.clone(), amps).expect("finite amplitudes");
        if s.norm() > 0.1 {
            return s.normalize().expect("non-zero");
        }
    }
}

/// Columns of a random unitary, by Gram-Schmidt.
fn random_frame(rng: &mut ChaCha8Rng, basis: &Basis, real: bool) -> Vec<StateVector> {
    let mut frame: Vec<StateVector> = Vec::new();
    while frame.len() < basis.dim() {
        let mut v = random_state(rng, basis, real);
        for u in &frame {
            let proj = weakval::hilbert::inner(u, &v).expect("same basis");
            v = v.add(&u.scale(-proj)).expect("same basis");
        }
        if v.norm() > 0.1 {
            frame.push(v.normalize().expect("non-zero"));
        }
    }
    frame
}

fn projector_sum(basis: &Basis, vs: &[StateVector]) -> OperatorMatrix {
    vs.iter().fold(
        OperatorMatrix::zeros(basis.clone(), basis.clone()),
        |acc, v| {
            acc.add(&projector_onto(v).expect("normalized"))
                .expect("same basis")
        },
    )
}

fn random_basis(rng: &mut ChaCha8Rng) -> Basis {
    let d = rng.gen_range(2..=4);
    Basis::new((0..d).map(|i| format!("e{i}"))).expect("distinct labels")
}

/// A pre/post pair whose overlap keeps weak values well conditioned.
fn random_prepost(rng: &mut ChaCha8Rng, basis: &Basis, real: bool) -> PrePost {
    loop {
        let pre = random_state(rng, basis, real);
        let post = random_state(rng, basis, real);
        let pp = PrePost::new(&pre, &post).expect("same basis");
        if pp.overlap().norm() > 0.2 {
            return pp;
        }
    }
}

fn weak_abl_conversions() -> Check {
    let to_err = |e: weakval::measure::MeasureError| e.to_string();
    close(
        "abl_from_weak(1, 0)",
        abl_from_weak(c(1.0, 0.0), c(0.0, 0.0)).map_err(to_err)?,
        1.0,
        1e-12,
    )?;
    close(
        "abl_from_weak(-1, 2)",
        abl_from_weak(c(-1.0, 0.0), c(2.0, 0.0)).map_err(to_err)?,
        0.2,
        1e-12,
    )?;
    let one = weak_from_abl(1.0).map_err(to_err)?;
    close("weak_from_abl(1).plus", one.plus, 1.0, 1e-10)?;
    close(
        "weak_from_abl(1).minus",
        need("minus root", one.minus)?,
        1.0,
        1e-10,
    )?;
    let fifth = weak_from_abl(0.2).map_err(to_err)?;
    close("weak_from_abl(1/5).plus", fifth.plus, 1.0 / 3.0, 1e-10)?;
    close(
        "weak_from_abl(1/5).minus",
        need("minus root", fifth.minus)?,
        -1.0,
        1e-10,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..50 {
        let basis = random_basis(&mut rng);
        let pp = random_prepost(&mut rng, &basis, true);
        let frame = random_frame(&mut rng, &basis, true);
        let k = rng.gen_range(1..basis.dim());
        let p = projector_sum(&basis, &frame[..k]);
        let q = projector_sum(&basis, &frame[k..]);
        let (w, cw) = (
            weak_value(&p, &pp).map_err(to_err)?,
            weak_value(&q, &pp).map_err(to_err)?,
        );
        let prob = abl_from_weak(w, cw).map_err(to_err)?;
        let roots = weak_from_abl(prob).map_err(to_err)?;
        if !roots.contains(w.re, 1e-10) {
            return Err(format!(
                "instance {i}: weak value {w} not among roots {roots:?} of p = {prob}"
            ));
        }
    }
    Ok(())
}

fn meter_limits() -> Check {
    let setup = scenarios::three_box_setup();
    let op = &setup.observables["C"];
    let spec = SpectralData::for_projector(op).map_err(|e| e.to_string())?;
    let pp = &setup.prepost;

    let mut errors = Vec::new();
    for ratio in [1e-1, 1e-2, 1e-3] {
        let model = PointerModel::with_ratio(ratio).map_err(|e| e.to_string())?;
        let shift = weak_shift_ratio(&spec, pp, &model).map_err(|e| e.to_string())?;
        errors.push((shift + 1.0).abs());
    }
    if !errors.windows(2).all(|w| w[1] < w[0]) {
        return Err(format!("weak-limit error not decreasing: {errors:?}"));
    }
    if errors[2] > 1e-3 {
        return Err(format!("|shift/g + 1| = {:.3e} at g/σ = 1e-3", errors[2]));
    }

    let model = PointerModel::with_ratio(1e3).map_err(|e| e.to_string())?;
    let outcome = simulate_pointer(&spec, pp, &model).map_err(|e| e.to_string())?;
    let abl = abl_probability(&spec, pp).map_err(|e| e.to_string())?;
    for ((comp, peak), weight) in outcome
        .components
        .iter()
        .zip(outcome.peak_weights())
        .zip(outcome.component_weights())
    {
        let want = abl.probability_of(comp.eigenvalue);
        let expected = if comp.eigenvalue == 1.0 { 0.2 } else { 0.8 };
        close(&format!("ABL({})", comp.eigenvalue), want, expected, 1e-10)?;
        close(
            &format!("peak weight {}", comp.eigenvalue),
            peak,
            want,
            1e-6,
        )?;
        close(
            &format!("component weight {}", comp.eigenvalue),
            weight,
            want,
            1e-6,
        )?;
    }
    Ok(())
}

fn random_hermitian(rng: &mut ChaCha8Rng, basis: &Basis) -> OperatorMatrix {
    let m = OperatorMatrix::from_fn(basis.clone(), basis.clone(), |_, _| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    m.add(&m.adjoint()).expect("square").scale(c(0.5, 0.0))
}

fn invariants() -> Check {
    let to_err = |e: weakval::measure::MeasureError| e.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..100 {
        let basis = random_basis(&mut rng);
        let pp = random_prepost(&mut rng, &basis, false);
        let tag = |what: &str| format!("instance {i} (dim {}): {what}", basis.dim());

        let (a, b) = (
            random_hermitian(&mut rng, &basis),
            random_hermitian(&mut rng, &basis),
        );
        let (x, y) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let combo = a
            .scale(c(x, 0.0))
            .add(&b.scale(c(y, 0.0)))
            .expect("same basis");
        let lhs = weak_value(&combo, &pp).map_err(to_err)?;
        let rhs =
            weak_value(&a, &pp).map_err(to_err)? * x + weak_value(&b, &pp).map_err(to_err)? * y;
        close_c(&tag("linearity"), lhs, rhs, 1e-10)?;

        let frame = random_frame(&mut rng, &basis, false);
        let mut sum = c(0.0, 0.0);
        for v in &frame {
            sum += weak_value(&projector_onto(v).expect("normalized"), &pp).map_err(to_err)?;
        }
        close_c(&tag("sum rule"), sum, c(1.0, 0.0), 1e-10)?;

        let phase = |rng: &mut ChaCha8Rng| {
            C64::from_polar(rng.gen_range(0.1..5.0), rng.gen_range(0.0..2.0 * PI))
        };
        let scaled = PrePost::new(
            &pp.pre().scale(phase(&mut rng)),
            &pp.post().scale(phase(&mut rng)),
        )
        .map_err(to_err)?;
        close_c(
            &tag("scale-phase invariance"),
            weak_value(&a, &scaled).map_err(to_err)?,
            weak_value(&a, &pp).map_err(to_err)?,
            1e-10,
        )?;

        let spec = weakval::measure::eigendecompose_hermitian(&a).map_err(to_err)?;
        let dist = abl_probability(&spec, &pp).map_err(to_err)?;
        close(&tag("ABL normalization"), dist.total(), 1.0, 1e-10)?;

        let k = rng.gen_range(1..basis.dim());
        let p = projector_sum(&basis, &frame[..k]);
        let q = projector_sum(&basis, &frame[k..]);
        let via_weak = abl_from_weak(
            weak_value(&p, &pp).map_err(to_err)?,
            weak_value(&q, &pp).map_err(to_err)?,
        )
        .map_err(to_err)?;
        let direct = abl_probability(&SpectralData::for_projector(&p).map_err(to_err)?, &pp)
            .map_err(to_err)?
            .probability_of(1.0);
        close(&tag("two-path ABL"), via_weak, direct, 1e-10)?;
    }
    Ok(())
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_weakval"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn json_complex(v: &Value, what: &str) -> Result<C64, String> {
    match (v["re"].as_f64(), v["im"].as_f64()) {
        (Some(re), Some(im)) => Ok(c(re, im)),
        _ => Err(format!("{what}: not a complex value: {v}")),
    }
}

fn json_abl_one(v: &Value, what: &str) -> Result<f64, String> {
    v.as_array()
        .and_then(|entries| {
            entries
                .iter()
                .find(|e| e["eigenvalue"].as_f64() == Some(1.0))
        })
        .and_then(|e| e["probability"].as_f64())
        .ok_or_else(|| format!("{what}: no probability for eigenvalue 1"))
}

fn dsl_cli_reproducibility() -> Check {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let tb_path = fixtures.join("threebox.wks");
    let mzi_path = fixtures.join("mzi.wks");

    let tb_bytes = cli(&["run", tb_path.to_str().unwrap()])?;
    if tb_bytes != cli(&["run", tb_path.to_str().unwrap()])? {
        return Err("three-box run output differs between invocations".into());
    }
    let tb: Value = serde_json::from_slice(&tb_bytes).map_err(|e| e.to_string())?;
    let builtin = scenarios::three_box();
    let direct = dsl::run(&std::fs::read_to_string(&tb_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut sum = c(0.0, 0.0);
    for (i, (op, want)) in [("A", 1.0), ("B", 1.0), ("C", -1.0)]
        .into_iter()
        .enumerate()
    {
        let key = format!("{:03}:{op}", i + 1);
        let w = json_complex(&tb["payload"]["weak_values"][&key], &key)?;
        close_c(&key, w, c(want, 0.0), 1e-10)?;
        close_c(
            &format!("{key} vs built-in"),
            w,
            need(op, builtin.weak(op))?,
            1e-12,
        )?;
        close_c(
            &format!("{key} vs library path"),
            w,
            need(&key, direct.weak(&key))?,
            1e-12,
        )?;
        sum += w;
    }
    close_c("A + B + C", sum, c(1.0, 0.0), 1e-10)?;
    for (i, (op, want)) in [("A", 1.0), ("B", 1.0), ("C", 0.2)].into_iter().enumerate() {
        let key = format!("{:03}:{op}", i + 4);
        let p = json_abl_one(&tb["payload"]["abl"][&key], &key)?;
        close(&key, p, want, 1e-10)?;
        close(
            &format!("{key} vs built-in"),
            p,
            need(op, builtin.abl_one(op))?,
            1e-12,
        )?;
    }

    let mzi_bytes = cli(&["run", mzi_path.to_str().unwrap()])?;
    if mzi_bytes != cli(&["run", mzi_path.to_str().unwrap()])? {
        return Err("mzi run output differs between invocations".into());
    }
    let mzi: Value = serde_json::from_slice(&mzi_bytes).map_err(|e| e.to_string())?;
    let bs = BeamSplitter::from_q(0.4472135955, 0.0).map_err(|e| e.to_string())?;
    let builtin = scenarios::mzi(&bs);
    let w = json_complex(&mzi["payload"]["weak_values"]["001:N"], "001:N")?;
    close_c("N@D", w, c(-1.0, 0.0), 1e-10)?;
    close_c(
        "N@D vs built-in",
        w,
        need("N@D", builtin.weak("N@D"))?,
        1e-12,
    )?;
    let p = json_abl_one(&mzi["payload"]["abl"]["003:N"], "003:N")?;
    close("ABL(N | D)", p, 0.2, 1e-10)?;
    close(
        "ABL(N | D) vs built-in",
        p,
        need("N@D", builtin.abl_one("N@D"))?,
        1e-12,
    )?;

    for args in [
        vec!["threebox"],
        vec!["hardy", "--format", "csv"],
        vec!["mzi", "--q", "0.4472135955", "--format", "table"],
    ] {
        if cli(&args)? != cli(&args)? {
            return Err(format!("{args:?} output differs between invocations"));
        }
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("three-box weak values", three_box_weak),
        ("three-box ABL probabilities", three_box_abl),
        ("Hardy evolved amplitudes", hardy_amplitudes),
        ("Hardy weak values", hardy_weak),
        ("MZI point check", mzi_point),
        ("MZI closed-form equivalence on 10x10 grid", mzi_grid),
        ("weak/ABL conversions", weak_abl_conversions),
        ("meter weak and strong limits", meter_limits),
        ("randomized invariant suites", invariants),
        ("DSL/CLI reproducibility", dsl_cli_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("PASS {:>2}. {name}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
