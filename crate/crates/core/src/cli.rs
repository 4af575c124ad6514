//! Command-line front end.
//!
//! Machine output goes to the `out` writer, everything meant for people
//! (errors, self-check notes in csv/table mode) to `err`. Reals are printed
//! in scientific notation with 12 significant digits so repeated runs are
//! byte-identical.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Number, Value};

use crate::dsl;
use crate::hilbert::{C64, DEFAULT_TOL};
use crate::measure::{ABLDistribution, MeasureError, SpectralData};
use crate::meter::{simulate_pointer, MeterError, MeterOutcome, PointerModel};
use crate::scenarios::{self, BeamSplitter, Port, ScenarioReport};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Table => "table",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "weakval",
    version,
    about = "Weak values, ABL probabilities and pointer simulations"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Tolerance used by the self-check notes.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Three-box paradox.
    Threebox,
    /// Hardy's electron-positron interferometers.
    Hardy,
    /// Single Mach-Zehnder interferometer.
    Mzi {
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        beta: f64,
    },
    /// Mach-Zehnder grid over q in (0, 1) and beta in [0, 2π).
    MziSweep {
        #[arg(long)]
        q_steps: usize,
        #[arg(long)]
        beta_steps: usize,
        /// Write the output here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a `.wks` scenario file.
    Run { file: PathBuf },
    /// Simulate a Gaussian pointer coupled to one observable.
    Meter {
        #[arg(long, value_enum)]
        scenario: MeterScenario,
        #[arg(long)]
        op: String,
        #[arg(long)]
        g: f64,
        #[arg(long)]
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MeterScenario {
    Threebox,
    Hardy,
}

/// Exit status with a message for standard error.
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Runs the tool; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, color: bool) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli, out, err, color) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message.trim_end());
            f.code
        }
    }
}

fn dispatch(
    cli: &Cli,
    out: &mut dyn Write,
    err: &mut dyn Write,
    color: bool,
) -> Result<i32, Failure> {
    if !(cli.tol.is_finite() && cli.tol >= 0.0) {
        return Err(usage(format!(
            "--tol must be a non-negative number, got {}",
            cli.tol
        )));
    }
    let emit = Emitter {
        format: cli.format,
        tol: cli.tol,
        color,
    };
    match &cli.command {
        Command::Threebox => emit
            .report(&scenarios::three_box(), out, err)
            .map(|_| EXIT_OK),
        Command::Hardy => emit.report(&scenarios::hardy(), out, err).map(|_| EXIT_OK),
        Command::Mzi { q, beta } => {
            if !beta.is_finite() {
                return Err(usage("--beta must be finite"));
            }
            let bs = BeamSplitter::from_q(*q, *beta).map_err(|e| usage(e.to_string()))?;
            emit.report(&scenarios::mzi(&bs), out, err).map(|_| EXIT_OK)
        }
        Command::MziSweep {
            q_steps,
            beta_steps,
            out: path,
        } => {
            if *q_steps == 0 || *beta_steps == 0 {
                return Err(usage("--q-steps and --beta-steps must be positive"));
            }
            let (qs, betas) = scenarios::sweep_axes(*q_steps, *beta_steps);
            let reports = scenarios::mzi_sweep(&qs, &betas).map_err(|e| usage(e.to_string()))?;
            let splitters = qs
                .iter()
                .flat_map(|&q| betas.iter().map(move |&b| BeamSplitter::from_q(q, b)));
            let rows = splitters
                .zip(&reports)
                .map(|(bs, rep)| Ok(SweepRow::new(&bs.map_err(|e| usage(e.to_string()))?, rep)))
                .collect::<Result<Vec<_>, Failure>>()?;
            let mut buf = Vec::new();
            emit.sweep(&rows, &mut buf)?;
            match path {
                Some(p) => std::fs::write(p, &buf).map_err(|e| Failure {
                    code: EXIT_INPUT,
                    message: format!("cannot write {}: {e}", p.display()),
                })?,
                None => out.write_all(&buf).map_err(io_failure)?,
            }
            Ok(EXIT_OK)
        }
        Command::Run { file } => {
            let source = std::fs::read_to_string(file).map_err(|e| Failure {
                code: EXIT_INPUT,
                message: format!("cannot read {}: {e}", file.display()),
            })?;
            let program = dsl::parse(&source).map_err(|e| Failure {
                code: EXIT_INPUT,
                message: format!("{}: {}", file.display(), e.render(&source)),
            })?;
            let report = dsl::evaluate(&program).map_err(|e| Failure {
                code: EXIT_INPUT,
                message: format!("{}: {e}", file.display()),
            })?;
            emit.report(&report, out, err)?;
            if dsl::defined_results(&report) == 0 {
                let _ = writeln!(err, "{}: no query produced a value", file.display());
                return Ok(EXIT_DEGENERATE);
            }
            Ok(EXIT_OK)
        }
        Command::Meter {
            scenario,
            op,
            g,
            sigma,
        } => {
            let model = PointerModel::new(*g, *sigma).map_err(|e| usage(e.to_string()))?;
            let (name, setup) = match scenario {
                MeterScenario::Threebox => ("threebox", scenarios::three_box_setup()),
                MeterScenario::Hardy => ("hardy", scenarios::hardy_setup()),
            };
            let Some(observable) = setup.observables.get(op) else {
                let known: Vec<&str> = setup.observables.keys().map(String::as_str).collect();
                return Err(usage(format!(
                    "unknown observable `{op}` for {name}; expected one of: {}",
                    known.join(", ")
                )));
            };
            let spec = SpectralData::for_projector(observable).map_err(|e| usage(e.to_string()))?;
            match simulate_pointer(&spec, &setup.prepost, &model) {
                Ok(outcome) => {
                    emit.meter(name, op, &model, &outcome, out)?;
                    Ok(EXIT_OK)
                }
                Err(MeterError::Measure(e @ MeasureError::NoConsistentHistory)) => Err(Failure {
                    code: EXIT_DEGENERATE,
                    message: e.to_string(),
                }),
                Err(e) => Err(Failure {
                    code: EXIT_INPUT,
                    message: e.to_string(),
                }),
            }
        }
    }
}

fn io_failure(e: io::Error) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: format!("write failed: {e}"),
    }
}

/// `x` with 12 significant digits and a signed exponent; negative zero
/// prints as zero.
pub fn format_real(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    let s = format!("{x:.11e}");
    match s.split_once('e') {
        Some((m, e)) if !e.starts_with('-') => format!("{m}e+{e}"),
        _ => s,
    }
}

fn real(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(
        format_real(x)
            .parse::<Number>()
            .expect("scientific literal is a JSON number"),
    )
}

fn complex(z: C64) -> Value {
    let mut m = Map::new();
    m.insert("im".into(), real(z.im));
    m.insert("re".into(), real(z.re));
    Value::Object(m)
}

fn error_marker(e: &MeasureError) -> Value {
    let mut m = Map::new();
    m.insert("error".into(), Value::String(e.code().into()));
    Value::Object(m)
}

fn distribution(d: &ABLDistribution) -> Value {
    Value::Array(
        d.entries()
            .iter()
            .map(|&(eig, p)| {
                let mut m = Map::new();
                m.insert("eigenvalue".into(), real(eig));
                m.insert("probability".into(), real(p));
                Value::Object(m)
            })
            .collect(),
    )
}

/// JSON payload for a report; `tol` feeds the appended self-check notes.
pub fn report_payload(report: &ScenarioReport, tol: f64) -> Value {
    let weak: Map<String, Value> = report
        .weak_values
        .iter()
        .map(|(k, e)| {
            (
                k.clone(),
                e.as_ref().map_or_else(error_marker, |z| complex(*z)),
            )
        })
        .collect();
    let abl: Map<String, Value> = report
        .abl
        .iter()
        .map(|(k, e)| {
            (
                k.clone(),
                e.as_ref().map_or_else(error_marker, distribution),
            )
        })
        .collect();
    let amplitudes: Map<String, Value> = report
        .amplitudes
        .iter()
        .map(|(k, z)| (k.clone(), complex(*z)))
        .collect();
    let notes: Vec<Value> = report
        .notes
        .iter()
        .cloned()
        .chain(report.self_check(tol))
        .map(Value::String)
        .collect();
    let families: Vec<Value> = report
        .families
        .iter()
        .map(|f| Value::Array(f.iter().cloned().map(Value::String).collect()))
        .collect();

    let mut m = Map::new();
    m.insert("abl".into(), Value::Object(abl));
    m.insert("amplitudes".into(), Value::Object(amplitudes));
    m.insert("families".into(), Value::Array(families));
    m.insert("name".into(), Value::String(report.name.clone()));
    m.insert("notes".into(), Value::Array(notes));
    m.insert(
        "post_selection_probability".into(),
        report.post_selection_probability.map_or(Value::Null, real),
    );
    m.insert("weak_values".into(), Value::Object(weak));
    Value::Object(m)
}

pub fn envelope(scenario: &str, format: Format, payload: Value) -> Value {
    let mut m = Map::new();
    m.insert("format".into(), Value::String(format.name().into()));
    m.insert("payload".into(), payload);
    m.insert("scenario".into(), Value::String(scenario.into()));
    m.insert("tool_version".into(), Value::String(TOOL_VERSION.into()));
    Value::Object(m)
}

/// One grid point of `mzi-sweep`. `None` marks a value undefined at a dark
/// port.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub q: f64,
    pub r: f64,
    pub beta: f64,
    pub n_at_d: Option<C64>,
    pub n_at_b: Option<C64>,
    pub abl_n_given_d: Option<f64>,
}

impl SweepRow {
    pub const HEADER: [&'static str; 9] = [
        "q",
        "r",
        "beta",
        "re_Nw_D",
        "im_Nw_D",
        "re_Nw_B",
        "im_Nw_B",
        "abl_N_given_D",
        "dark_port_flag",
    ];

    pub fn new(bs: &BeamSplitter, report: &ScenarioReport) -> Self {
        Self {
            q: bs.q(),
            r: bs.r(),
            beta: bs.beta(),
            n_at_d: report.weak(&format!("N@{}", Port::D.label())),
            n_at_b: report.weak(&format!("N@{}", Port::B.label())),
            abl_n_given_d: report.abl_one(&format!("N@{}", Port::D.label())),
        }
    }

    pub fn dark(&self) -> bool {
        self.n_at_d.is_none() || self.n_at_b.is_none()
    }

    fn cells(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_real).unwrap_or_default();
        vec![
            format_real(self.q),
            format_real(self.r),
            format_real(self.beta),
            opt(self.n_at_d.map(|z| z.re)),
            opt(self.n_at_d.map(|z| z.im)),
            opt(self.n_at_b.map(|z| z.re)),
            opt(self.n_at_b.map(|z| z.im)),
            opt(self.abl_n_given_d),
            u8::from(self.dark()).to_string(),
        ]
    }

    fn json(&self) -> Value {
        let opt = |x: Option<f64>| x.map_or(Value::Null, real);
        let mut m = Map::new();
        for (key, cell) in Self::HEADER.iter().zip([
            real(self.q),
            real(self.r),
            real(self.beta),
            opt(self.n_at_d.map(|z| z.re)),
            opt(self.n_at_d.map(|z| z.im)),
            opt(self.n_at_b.map(|z| z.re)),
            opt(self.n_at_b.map(|z| z.im)),
            opt(self.abl_n_given_d),
            Value::from(u8::from(self.dark())),
        ]) {
            m.insert((*key).into(), cell);
        }
        Value::Object(m)
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), Failure> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header).map_err(csv_failure)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_failure)?;
        }
        w.flush().map_err(io_failure)
    }

    fn write_aligned(&self, out: &mut dyn Write, color: bool) -> Result<(), Failure> {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            padded.join("  ").trim_end().to_owned()
        };
        let head = line(&self.header);
        if color {
            writeln!(out, "\x1b[1m{head}\x1b[0m").map_err(io_failure)?;
        } else {
            writeln!(out, "{head}").map_err(io_failure)?;
        }
        for row in &self.rows {
            writeln!(out, "{}", line(row)).map_err(io_failure)?;
        }
        Ok(())
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: format!("write failed: {e}"),
    }
}

fn report_table(report: &ScenarioReport) -> Table {
    let mut t = Table::new(&["kind", "key", "eigenvalue", "re", "im", "error"]);
    let s = String::new;
    for (k, e) in &report.weak_values {
        match e {
            Ok(z) => t.push(vec![
                "weak".into(),
                k.clone(),
                s(),
                format_real(z.re),
                format_real(z.im),
                s(),
            ]),
            Err(e) => t.push(vec![
                "weak".into(),
                k.clone(),
                s(),
                s(),
                s(),
                e.code().into(),
            ]),
        }
    }
    for (k, e) in &report.abl {
        match e {
            Ok(d) => {
                for &(eig, p) in d.entries() {
                    t.push(vec![
                        "abl".into(),
                        k.clone(),
                        format_real(eig),
                        format_real(p),
                        s(),
                        s(),
                    ]);
                }
            }
            Err(e) => t.push(vec![
                "abl".into(),
                k.clone(),
                s(),
                s(),
                s(),
                e.code().into(),
            ]),
        }
    }
    for (k, z) in &report.amplitudes {
        t.push(vec![
            "amplitude".into(),
            k.clone(),
            s(),
            format_real(z.re),
            format_real(z.im),
            s(),
        ]);
    }
    if let Some(p) = report.post_selection_probability {
        t.push(vec![
            "post_selection_probability".into(),
            s(),
            s(),
            format_real(p),
            s(),
            s(),
        ]);
    }
    t
}

fn meter_payload(op: &str, model: &PointerModel, outcome: &MeterOutcome) -> Value {
    let components: Vec<Value> = outcome
        .components
        .iter()
        .zip(outcome.component_weights())
        .zip(outcome.peak_weights())
        .map(|((c, w), pw)| {
            let mut m = Map::new();
            m.insert("amplitude".into(), complex(c.amplitude));
            m.insert("center".into(), real(c.center));
            m.insert("eigenvalue".into(), real(c.eigenvalue));
            m.insert("peak_weight".into(), real(pw));
            m.insert("weight".into(), real(w));
            Value::Object(m)
        })
        .collect();
    let mut m = Map::new();
    m.insert("components".into(), Value::Array(components));
    m.insert("g".into(), real(model.g()));
    m.insert("op".into(), Value::String(op.into()));
    m.insert("pointer_mean".into(), real(outcome.pointer_mean));
    m.insert("pointer_variance".into(), real(outcome.pointer_variance));
    m.insert(
        "post_selection_probability".into(),
        real(outcome.post_selection_probability),
    );
    m.insert("sigma".into(), real(model.sigma()));
    m.insert(
        "shift_ratio".into(),
        if model.g() > 0.0 {
            real(outcome.pointer_mean / model.g())
        } else {
            Value::Null
        },
    );
    Value::Object(m)
}

fn meter_table(op: &str, model: &PointerModel, outcome: &MeterOutcome) -> Table {
    let mut t = Table::new(&["kind", "key", "value"]);
    let mut kv = |k: &str, key: &str, v: String| t.push(vec![k.into(), key.into(), v]);
    kv("param", "op", op.into());
    kv("param", "g", format_real(model.g()));
    kv("param", "sigma", format_real(model.sigma()));
    kv("pointer", "mean", format_real(outcome.pointer_mean));
    kv("pointer", "variance", format_real(outcome.pointer_variance));
    kv(
        "pointer",
        "post_selection_probability",
        format_real(outcome.post_selection_probability),
    );
    if model.g() > 0.0 {
        kv(
            "pointer",
            "shift_ratio",
            format_real(outcome.pointer_mean / model.g()),
        );
    }
    for ((c, w), pw) in outcome
        .components
        .iter()
        .zip(outcome.component_weights())
        .zip(outcome.peak_weights())
    {
        let key = format_real(c.eigenvalue);
        kv("weight", &key, format_real(w));
        kv("peak_weight", &key, format_real(pw));
    }
    t
}

struct Emitter {
    format: Format,
    tol: f64,
    color: bool,
}

impl Emitter {
    fn json(&self, scenario: &str, payload: Value, out: &mut dyn Write) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(&envelope(scenario, self.format, payload))
            .expect("values serialize");
        writeln!(out, "{text}").map_err(io_failure)
    }

    fn table(&self, t: &Table, out: &mut dyn Write) -> Result<(), Failure> {
        match self.format {
            Format::Csv => t.write_csv(out),
            _ => t.write_aligned(out, self.color),
        }
    }

    fn report(
        &self,
        report: &ScenarioReport,
        out: &mut dyn Write,
        err: &mut dyn Write,
    ) -> Result<(), Failure> {
        if self.format == Format::Json {
            return self.json(&report.name, report_payload(report, self.tol), out);
        }
        self.table(&report_table(report), out)?;
        for note in report
            .notes
            .iter()
            .cloned()
            .chain(report.self_check(self.tol))
        {
            let _ = writeln!(err, "note: {note}");
        }
        Ok(())
    }

    fn sweep(&self, rows: &[SweepRow], out: &mut dyn Write) -> Result<(), Failure> {
        if self.format == Format::Json {
            let payload = Value::Array(rows.iter().map(SweepRow::json).collect());
            return self.json("mzi-sweep", payload, out);
        }
        let mut t = Table::new(&SweepRow::HEADER);
        for row in rows {
            t.push(row.cells());
        }
        self.table(&t, out)
    }

    fn meter(
        &self,
        scenario: &str,
        op: &str,
        model: &PointerModel,
        outcome: &MeterOutcome,
        out: &mut dyn Write,
    ) -> Result<(), Failure> {
        if self.format == Format::Json {
            return self.json(scenario, meter_payload(op, model, outcome), out);
        }
        self.table(&meter_table(op, model, outcome), out)
    }
}
