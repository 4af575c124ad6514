//! The `.wks` scenario language.
//!
//! One statement per line, `#` starts a comment, and the first non-blank
//! line must be the version header `wks 1`:
//!
//! ```text
//! wks 1
//! basis Boxes A B C
//! ket in : Boxes = 1|A> + 1|B> + 1|C>
//! ket f  : Boxes = 1|A> + 1|B> - 1|C>
//! op A = proj |A>              # also: proj k, op S = A + B, op T = 2.5 * A
//! unitary U : Arms -> Ports = bs 0.6 0.8 0     # or: = rows [ 1 , 0 ; 0 , 1 ]
//! weak A pre in post f [via U]
//! abl  A pre in post f [via U]
//! ```
//!
//! Coefficients are `a`, `ai` or `a+bi` (no spaces inside a literal) and may
//! be omitted for 1. Kets are normalized automatically. Names of kets,
//! operators, unitaries and bases share one namespace and must be declared
//! before use. Basis labels may not contain whitespace or any of `:=[],;*#|>`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::hilbert::{is_unitary, projector_onto, Basis, OperatorMatrix, StateVector, C64};
use crate::measure::{
    abl_probability, eigendecompose_hermitian, weak_value, PrePost, SpectralData,
};
use crate::scenarios::{BeamSplitter, ScenarioReport};

/// Accepted deviation from unitarity for `bs` and `rows` literals; the
/// matrix is re-orthonormalized before use.
pub const LITERAL_UNITARITY_TOL: f64 = 1e-6;

const PUNCT: &[char] = &[':', '=', '[', ']', ',', ';', '*'];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message} (at `{offending_text}`)")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub offending_text: String,
}

impl ParseError {
    fn new(
        line: usize,
        column: usize,
        message: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            offending_text: text.into(),
        }
    }

    /// Multi-line rendering with the source line and a caret.
    pub fn render(&self, source: &str) -> String {
        let src_line = source.lines().nth(self.line - 1).unwrap_or("");
        let gutter = self.line.to_string();
        format!(
            "error: {}\n{} | {}\n{} | {}^\n",
            self.message,
            gutter,
            src_line,
            " ".repeat(gutter.len()),
            " ".repeat(self.column - 1)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Structural { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    Weak,
    Abl,
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Weak => "weak",
            QueryKind::Abl => "abl",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpDef {
    Proj(String),
    /// Projector onto one basis label, written `proj |label>`; the label must
    /// belong to exactly one declared basis.
    ProjLabel {
        basis: String,
        label: String,
    },
    Sum(String, String),
    Scaled(f64, String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitaryDef {
    Splitter {
        q: f64,
        r: f64,
        beta: f64,
    },
    /// Rows indexed by the target basis, columns by the source basis.
    Rows(Vec<Vec<C64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Basis {
        name: String,
        labels: Vec<String>,
    },
    Ket {
        name: String,
        basis: String,
        terms: Vec<(C64, String)>,
    },
    Op {
        name: String,
        def: OpDef,
    },
    Unitary {
        name: String,
        from: String,
        to: String,
        def: UnitaryDef,
    },
    Query {
        kind: QueryKind,
        op: String,
        pre: String,
        post: String,
        via: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub line: usize,
    pub statement: Statement,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub statements: Vec<Located>,
}

impl Program {
    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn query_count(&self) -> usize {
        self.statements
            .iter()
            .filter(|s| matches!(s.statement, Statement::Query { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
    byte: usize,
}

/// Splits a line into words and single-character punctuation, keeping
/// 1-based character columns.
fn lex(line: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col0, (byte, ch)) in line.char_indices().enumerate() {
        let col = col0 + 1;
        if ch.is_whitespace() || PUNCT.contains(&ch) {
            if let Some((b, c)) = start.take() {
                toks.push(Tok {
                    text: &line[b..byte],
                    col: c,
                    byte: b,
                });
            }
            if !ch.is_whitespace() {
                toks.push(Tok {
                    text: &line[byte..byte + ch.len_utf8()],
                    col,
                    byte,
                });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        toks.push(Tok {
            text: &line[b..],
            col: c,
            byte: b,
        });
    }
    toks
}

fn parse_real(s: &str) -> Option<f64> {
    let ok = !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'))
        && s.chars().any(|c| c.is_ascii_digit());
    ok.then(|| s.parse::<f64>().ok())
        .flatten()
        .filter(|x| x.is_finite())
}

/// Parses `a`, `ai`, `a+bi`, `a-bi`, `i` and `-i`.
pub fn parse_complex(s: &str) -> Option<C64> {
    let Some(body) = s.strip_suffix('i') else {
        return parse_real(s).map(|re| C64::new(re, 0.0));
    };
    let imag = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => parse_real(t),
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Some(C64::new(parse_real(&body[..k])?, imag(&body[k..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

#[derive(Debug, Clone)]
enum Sym {
    Basis(Basis),
    Ket(String),
    Op(String),
    Unitary(String, String),
}

impl Sym {
    fn kind(&self) -> &'static str {
        match self {
            Sym::Basis(_) => "basis",
            Sym::Ket(_) => "ket",
            Sym::Op(_) => "operator",
            Sym::Unitary(..) => "unitary",
        }
    }
}

struct Parser {
    line: usize,
    symbols: HashMap<String, Sym>,
}

impl Parser {
    fn err(
        &self,
        tok: Option<&Tok<'_>>,
        line_text: &str,
        message: impl Into<String>,
    ) -> ParseError {
        match tok {
            Some(t) => ParseError::new(self.line, t.col, message, t.text),
            None => {
                let col = line_text.trim_end().chars().count() + 1;
                ParseError::new(self.line, col, message, "")
            }
        }
    }

    fn expect<'a>(
        &self,
        toks: &[Tok<'a>],
        k: usize,
        what: &str,
        line: &str,
    ) -> Result<Tok<'a>, ParseError> {
        let t = toks.get(k).copied();
        match t {
            Some(t) if t.text == what => Ok(t),
            _ => Err(self.err(t.as_ref(), line, format!("expected `{what}`"))),
        }
    }

    fn word<'a>(
        &self,
        toks: &[Tok<'a>],
        k: usize,
        what: &str,
        line: &str,
    ) -> Result<Tok<'a>, ParseError> {
        match toks.get(k) {
            Some(t) if !t.text.starts_with(PUNCT) => Ok(*t),
            other => Err(self.err(other, line, format!("expected {what}"))),
        }
    }

    fn end(&self, toks: &[Tok<'_>], k: usize, line: &str) -> Result<(), ParseError> {
        match toks.get(k) {
            None => Ok(()),
            Some(t) => Err(self.err(Some(t), line, "unexpected trailing input")),
        }
    }

    fn fresh(&self, tok: &Tok<'_>, line: &str) -> Result<String, ParseError> {
        if let Some(sym) = self.symbols.get(tok.text) {
            return Err(self.err(
                Some(tok),
                line,
                format!("`{}` is already declared as a {}", tok.text, sym.kind()),
            ));
        }
        Ok(tok.text.to_owned())
    }

    fn lookup(&self, tok: &Tok<'_>, line: &str) -> Result<&Sym, ParseError> {
        self.symbols
            .get(tok.text)
            .ok_or_else(|| self.err(Some(tok), line, format!("undeclared name `{}`", tok.text)))
    }

    fn basis(&self, tok: &Tok<'_>, line: &str) -> Result<Basis, ParseError> {
        match self.lookup(tok, line)? {
            Sym::Basis(b) => Ok(b.clone()),
            other => Err(self.err(
                Some(tok),
                line,
                format!("`{}` is a {}, not a basis", tok.text, other.kind()),
            )),
        }
    }

    fn ket_basis(&self, tok: &Tok<'_>, line: &str) -> Result<String, ParseError> {
        match self.lookup(tok, line)? {
            Sym::Ket(b) => Ok(b.clone()),
            other => Err(self.err(
                Some(tok),
                line,
                format!("`{}` is a {}, not a ket", tok.text, other.kind()),
            )),
        }
    }

    fn op_basis(&self, tok: &Tok<'_>, line: &str) -> Result<String, ParseError> {
        match self.lookup(tok, line)? {
            Sym::Op(b) => Ok(b.clone()),
            other => Err(self.err(
                Some(tok),
                line,
                format!("`{}` is a {}, not an operator", tok.text, other.kind()),
            )),
        }
    }

    fn real(&self, tok: &Tok<'_>, line: &str) -> Result<f64, ParseError> {
        parse_real(tok.text).ok_or_else(|| self.err(Some(tok), line, "malformed real literal"))
    }

    fn statement(&mut self, toks: &[Tok<'_>], line: &str) -> Result<Statement, ParseError> {
        let head = toks[0];
        match head.text {
            "basis" => self.basis_decl(toks, line),
            "ket" => self.ket_decl(toks, line),
            "op" => self.op_decl(toks, line),
            "unitary" => self.unitary_decl(toks, line),
            "weak" => self.query(QueryKind::Weak, toks, line),
            "abl" => self.query(QueryKind::Abl, toks, line),
            _ => Err(self.err(
                Some(&head),
                line,
                format!("unknown statement `{}`", head.text),
            )),
        }
    }

    fn basis_decl(&mut self, toks: &[Tok<'_>], line: &str) -> Result<Statement, ParseError> {
        let name_tok = self.word(toks, 1, "a basis name", line)?;
        let name = self.fresh(&name_tok, line)?;
        let mut labels = Vec::new();
        for t in &toks[2..] {
            if t.text.starts_with(PUNCT) || t.text.contains(['|', '>']) {
                return Err(self.err(Some(t), line, "invalid basis label"));
            }
            if labels.iter().any(|l| l == t.text) {
                return Err(self.err(Some(t), line, format!("duplicate label `{}`", t.text)));
            }
            labels.push(t.text.to_owned());
        }
        if labels.is_empty() {
            return Err(self.err(None, line, "a basis needs at least one label"));
        }
        let basis = Basis::new(labels.clone())
            .map_err(|e| self.err(Some(&name_tok), line, e.to_string()))?;
        self.symbols.insert(name.clone(), Sym::Basis(basis));
        Ok(Statement::Basis { name, labels })
    }

    fn ket_decl(&mut self, toks: &[Tok<'_>], line: &str) -> Result<Statement, ParseError> {
        let name_tok = self.word(toks, 1, "a ket name", line)?;
        let name = self.fresh(&name_tok, line)?;
        self.expect(toks, 2, ":", line)?;
        let basis_tok = self.word(toks, 3, "a basis name", line)?;
        let basis = self.basis(&basis_tok, line)?;
        let eq = self.expect(toks, 4, "=", line)?;
        let terms = self.ket_terms(line, eq.byte + 1, eq.col + 1, &basis)?;

        let norm: f64 = {
            let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
            for (c, l) in &terms {
                amps[basis.index_of(l).expect("checked")] += c;
            }
            amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
        };
        if !(norm >= crate::hilbert::ZERO_NORM) {
            return Err(self.err(Some(&name_tok), line, "ket has zero norm"));
        }
        self.symbols
            .insert(name.clone(), Sym::Ket(basis_tok.text.to_owned()));
        Ok(Statement::Ket {
            name,
            basis: basis_tok.text.to_owned(),
            terms,
        })
    }

    /// Scans `c₁|l₁> ± c₂|l₂> ...` starting at byte `start` (column `col0`).
    fn ket_terms(
        &self,
        line: &str,
        start: usize,
        col0: usize,
        basis: &Basis,
    ) -> Result<Vec<(C64, String)>, ParseError> {
        let rest = &line[start..];
        let chars: Vec<(usize, char)> = rest.char_indices().collect();
        let col_of = |k: usize| col0 + k;
        let text_at = |k: usize, len: usize| -> String {
            chars[k..(k + len).min(chars.len())]
                .iter()
                .map(|c| c.1)
                .collect()
        };
        let at = |k: usize, msg: &str, len: usize| {
            ParseError::new(
                self.line,
                col_of(k.min(chars.len())),
                msg,
                if k < chars.len() {
                    text_at(k, len)
                } else {
                    String::new()
                },
            )
        };

        let mut terms = Vec::new();
        let mut k = 0;
        let skip_ws = |k: &mut usize| {
            while *k < chars.len() && chars[*k].1.is_whitespace() {
                *k += 1;
            }
        };
        loop {
            skip_ws(&mut k);
            if k >= chars.len() {
                if terms.is_empty() {
                    return Err(at(k, "expected a ket expression", 0));
                }
                break;
            }
            let mut sign = 1.0;
            if !terms.is_empty() {
                match chars[k].1 {
                    '+' => {}
                    '-' => sign = -1.0,
                    _ => return Err(at(k, "expected `+` or `-` between terms", 1)),
                }
                k += 1;
                skip_ws(&mut k);
            }
            let coef_start = k;
            while k < chars.len() && chars[k].1 != '|' {
                k += 1;
            }
            if k >= chars.len() {
                return Err(at(
                    coef_start,
                    "expected `|label>`",
                    chars.len() - coef_start,
                ));
            }
            let coef_text: String = chars[coef_start..k].iter().map(|c| c.1).collect();
            let coef_trim = coef_text.trim_end();
            if coef_trim.chars().any(char::is_whitespace) {
                return Err(at(
                    coef_start,
                    "malformed complex literal",
                    coef_trim.chars().count(),
                ));
            }
            let coef = match coef_trim {
                "" | "+" => Some(C64::new(1.0, 0.0)),
                "-" => Some(C64::new(-1.0, 0.0)),
                t => parse_complex(t),
            }
            .ok_or_else(|| {
                at(
                    coef_start,
                    "malformed complex literal",
                    coef_trim.chars().count(),
                )
            })?;

            let bar = k;
            k += 1;
            let label_start = k;
            while k < chars.len() && chars[k].1 != '>' {
                k += 1;
            }
            if k >= chars.len() {
                return Err(at(bar, "unterminated ket, expected `>`", chars.len() - bar));
            }
            let label: String = chars[label_start..k].iter().map(|c| c.1).collect();
            let label = label.trim().to_owned();
            if basis.index_of(&label).is_none() {
                return Err(ParseError::new(
                    self.line,
                    col_of(label_start),
                    format!("undeclared label `{label}`"),
                    label,
                ));
            }
            k += 1;
            terms.push((coef * sign, label));
        }
        Ok(terms)
    }

    fn op_decl(&mut self, toks: &[Tok<'_>], line: &str) -> Result<Statement, ParseError> {
        let name_tok = self.word(toks, 1, "an operator name", line)?;
        let name = self.fresh(&name_tok, line)?;
        self.expect(toks, 2, "=", line)?;
        let first = self.word(toks, 3, "`proj`, an operator or a real factor", line)?;

        let (def, basis) = if first.text == "proj"
            && toks.get(4).is_some_and(|t| t.text.starts_with('|'))
        {
            let t = toks[4];
            let label = t
                .text
                .strip_prefix('|')
                .and_then(|l| l.strip_suffix('>'))
                .filter(|l| !l.is_empty())
                .ok_or_else(|| self.err(Some(&t), line, "expected `|label>`"))?;
            let mut owners: Vec<&String> = self
                .symbols
                .iter()
                .filter(|(_, s)| matches!(s, Sym::Basis(b) if b.index_of(label).is_some()))
                .map(|(n, _)| n)
                .collect();
            owners.sort();
            let basis = match owners.as_slice() {
                [one] => (*one).clone(),
                [] => return Err(self.err(Some(&t), line, format!("undeclared label `{label}`"))),
                _ => {
                    return Err(self.err(
                        Some(&t),
                        line,
                        format!("label `{label}` is ambiguous between bases {owners:?}"),
                    ))
                }
            };
            self.end(toks, 5, line)?;
            (
                OpDef::ProjLabel {
                    basis: basis.clone(),
                    label: label.to_owned(),
                },
                basis,
            )
        } else if first.text == "proj" {
            let ket = self.word(toks, 4, "a ket name", line)?;
            let basis = self.ket_basis(&ket, line)?;
            self.end(toks, 5, line)?;
            (OpDef::Proj(ket.text.to_owned()), basis)
        } else if toks.get(4).is_some_and(|t| t.text == "*") {
            let factor = self.real(&first, line)?;
            let op = self.word(toks, 5, "an operator name", line)?;
            let basis = self.op_basis(&op, line)?;
            self.end(toks, 6, line)?;
            (OpDef::Scaled(factor, op.text.to_owned()), basis)
        } else {
            let lhs_basis = self.op_basis(&first, line)?;
            let plus = toks.get(4);
            if plus.map(|t| t.text) != Some("+") {
                return Err(self.err(plus, line, "expected `+` or `*`"));
            }
            let rhs = self.word(toks, 5, "an operator name", line)?;
            let rhs_basis = self.op_basis(&rhs, line)?;
            if rhs_basis != lhs_basis {
                return Err(self.err(
                    Some(&rhs),
                    line,
                    format!(
                        "dimension mismatch: `{}` acts on {lhs_basis}, `{}` on {rhs_basis}",
                        first.text, rhs.text
                    ),
                ));
            }
            self.end(toks, 6, line)?;
            (
                OpDef::Sum(first.text.to_owned(), rhs.text.to_owned()),
                lhs_basis,
            )
        };
        self.symbols.insert(name.clone(), Sym::Op(basis));
        Ok(Statement::Op { name, def })
    }

    fn unitary_decl(&mut self, toks: &[Tok<'_>], line: &str) -> Result<Statement, ParseError> {
        let name_tok = self.word(toks, 1, "a unitary name", line)?;
        let name = self.fresh(&name_tok, line)?;
        self.expect(toks, 2, ":", line)?;
        let from_tok = self.word(toks, 3, "a source basis", line)?;
        let from = self.basis(&from_tok, line)?;
        self.expect(toks, 4, "->", line)?;
        let to_tok = self.word(toks, 5, "a target basis", line)?;
        let to = self.basis(&to_tok, line)?;
        self.expect(toks, 6, "=", line)?;
        let kind = self.word(toks, 7, "`bs` or `rows`", line)?;

        let def = match kind.text {
            "bs" => {
                if from.dim() != 2 || to.dim() != 2 {
                    return Err(self.err(
                        Some(&kind),
                        line,
                        "dimension mismatch: `bs` needs two-label bases",
                    ));
                }
                let mut vals = [0.0; 3];
                for (i, v) in vals.iter_mut().enumerate() {
                    let t = self.word(toks, 8 + i, "a real parameter", line)?;
                    *v = self.real(&t, line)?;
                }
                self.end(toks, 11, line)?;
                let [q, r, beta] = vals;
                if (q * q + r * r - 1.0).abs() > LITERAL_UNITARITY_TOL {
                    return Err(self.err(
                        Some(&toks[8]),
                        line,
                        format!("beam splitter needs q² + r² = 1, got {}", q * q + r * r),
                    ));
                }
                UnitaryDef::Splitter { q, r, beta }
            }
            "rows" => {
                let rows = self.rows(toks, 8, line)?;
                if rows.len() != to.dim() || rows.iter().any(|r| r.len() != from.dim()) {
                    return Err(self.err(
                        Some(&kind),
                        line,
                        format!(
                            "dimension mismatch: expected {} rows of {} entries",
                            to.dim(),
                            from.dim()
                        ),
                    ));
                }
                let m = OperatorMatrix::new(from.clone(), to.clone(), rows.concat())
                    .map_err(|e| self.err(Some(&kind), line, e.to_string()))?;
                if !is_unitary(&m, LITERAL_UNITARITY_TOL) {
                    return Err(self.err(Some(&kind), line, "matrix is not unitary"));
                }
                UnitaryDef::Rows(rows)
            }
            _ => return Err(self.err(Some(&kind), line, "expected `bs` or `rows`")),
        };
        self.symbols.insert(
            name.clone(),
            Sym::Unitary(from_tok.text.into(), to_tok.text.into()),
        );
        Ok(Statement::Unitary {
            name,
            from: from_tok.text.to_owned(),
            to: to_tok.text.to_owned(),
            def,
        })
    }

    fn rows(&self, toks: &[Tok<'_>], k0: usize, line: &str) -> Result<Vec<Vec<C64>>, ParseError> {
        self.expect(toks, k0, "[", line)?;
        let mut rows = vec![Vec::new()];
        let mut k = k0 + 1;
        loop {
            let t = self.word(toks, k, "a complex entry", line)?;
            let z = parse_complex(t.text)
                .ok_or_else(|| self.err(Some(&t), line, "malformed complex literal"))?;
            rows.last_mut().expect("non-empty").push(z);
            k += 1;
            match toks.get(k).map(|t| t.text) {
                Some(",") => {}
                Some(";") => rows.push(Vec::new()),
                Some("]") => break,
                _ => return Err(self.err(toks.get(k), line, "expected `,`, `;` or `]`")),
            }
            k += 1;
        }
        self.end(toks, k + 1, line)?;
        Ok(rows)
    }

    fn query(
        &mut self,
        kind: QueryKind,
        toks: &[Tok<'_>],
        line: &str,
    ) -> Result<Statement, ParseError> {
        let op_tok = self.word(toks, 1, "an operator name", line)?;
        let op_basis = self.op_basis(&op_tok, line)?;
        self.expect(toks, 2, "pre", line)?;
        let pre_tok = self.word(toks, 3, "a ket name", line)?;
        let pre_basis = self.ket_basis(&pre_tok, line)?;
        self.expect(toks, 4, "post", line)?;
        let post_tok = self.word(toks, 5, "a ket name", line)?;
        let post_basis = self.ket_basis(&post_tok, line)?;

        if op_basis != pre_basis {
            return Err(self.err(
                Some(&pre_tok),
                line,
                format!(
                    "dimension mismatch: `{}` acts on {op_basis}, `{}` lives in {pre_basis}",
                    op_tok.text, pre_tok.text
                ),
            ));
        }
        let via = match toks.get(6) {
            None => {
                if post_basis != pre_basis {
                    return Err(self.err(
                        Some(&post_tok),
                        line,
                        format!(
                            "dimension mismatch: `{}` lives in {post_basis}; add `via <unitary>`",
                            post_tok.text
                        ),
                    ));
                }
                None
            }
            Some(t) if t.text == "via" => {
                let u_tok = self.word(toks, 7, "a unitary name", line)?;
                let (from, to) = match self.lookup(&u_tok, line)? {
                    Sym::Unitary(f, t) => (f.clone(), t.clone()),
                    other => {
                        return Err(self.err(
                            Some(&u_tok),
                            line,
                            format!("`{}` is a {}, not a unitary", u_tok.text, other.kind()),
                        ))
                    }
                };
                if from != pre_basis || to != post_basis {
                    return Err(self.err(Some(&u_tok), line, format!("dimension mismatch: `{}` maps {from} -> {to}, query needs {pre_basis} -> {post_basis}", u_tok.text)));
                }
                self.end(toks, 8, line)?;
                Some(u_tok.text.to_owned())
            }
            Some(t) => return Err(self.err(Some(t), line, "expected `via` or end of line")),
        };
        Ok(Statement::Query {
            kind,
            op: op_tok.text.to_owned(),
            pre: pre_tok.text.to_owned(),
            post: post_tok.text.to_owned(),
            via,
        })
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(code, _)| code)
}

pub fn parse(source: &str) -> Result<Program, ParseError> {
    let mut parser = Parser {
        line: 0,
        symbols: HashMap::new(),
    };
    let mut program = Program::default();
    let mut seen_header = false;

    for (idx, raw) in source.lines().enumerate() {
        parser.line = idx + 1;
        let line = strip_comment(raw);
        let toks = lex(line);
        if toks.is_empty() {
            continue;
        }
        if !seen_header {
            let texts: Vec<&str> = toks.iter().map(|t| t.text).collect();
            match texts.as_slice() {
                ["wks", "1"] => {
                    seen_header = true;
                    continue;
                }
                ["wks", _] => {
                    return Err(parser.err(Some(&toks[1]), line, "unsupported format version"))
                }
                _ => return Err(parser.err(Some(&toks[0]), line, "missing `wks 1` header")),
            }
        }
        let statement = parser.statement(&toks, line)?;
        program.statements.push(Located {
            line: parser.line,
            statement,
        });
    }
    Ok(program)
}

/// Gram-Schmidt over the columns, turning a nearly unitary literal into an
/// exactly unitary map.
fn orthonormalize_columns(m: &OperatorMatrix) -> OperatorMatrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut columns: Vec<Vec<C64>> = (0..cols)
        .map(|c| (0..rows).map(|r| m.get(r, c)).collect())
        .collect();
    for j in 0..cols {
        let (done, rest) = columns.split_at_mut(j);
        let col = &mut rest[0];
        for prev in done.iter() {
            let proj: C64 = prev.iter().zip(col.iter()).map(|(p, x)| p.conj() * x).sum();
            for (x, p) in col.iter_mut().zip(prev) {
                *x -= p * proj;
            }
        }
        let n = columns[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut columns[j] {
            *z /= n;
        }
    }
    OperatorMatrix::from_fn(m.domain().clone(), m.codomain().clone(), |r, c| {
        columns[c][r]
    })
}

fn is_projector(op: &OperatorMatrix) -> bool {
    op.is_hermitian(crate::hilbert::DEFAULT_TOL)
        && op
            .compose(op)
            .ok()
            .and_then(|sq| sq.max_abs_diff(op))
            .is_some_and(|d| d <= crate::hilbert::DEFAULT_TOL)
}

/// Executes the queries of `program` in order. Weak values and ABL
/// distributions are keyed `NNN:<op>` by 1-based query index; undefined
/// results are stored as error entries.
pub fn evaluate(program: &Program) -> Result<ScenarioReport, EvalError> {
    let mut bases: HashMap<&str, Basis> = HashMap::new();
    let mut kets: HashMap<&str, StateVector> = HashMap::new();
    let mut ops: HashMap<&str, OperatorMatrix> = HashMap::new();
    let mut unitaries: HashMap<&str, OperatorMatrix> = HashMap::new();
    let mut report = ScenarioReport::new("dsl");
    let mut query_index = 0;

    for located in &program.statements {
        let line = located.line;
        let structural = |message: String| EvalError::Structural { line, message };
        let missing = |name: &str| structural(format!("`{name}` is not declared"));
        match &located.statement {
            Statement::Basis { name, labels } => {
                let b = Basis::new(labels.clone()).map_err(|e| structural(e.to_string()))?;
                bases.insert(name, b);
            }
            Statement::Ket { name, basis, terms } => {
                let b = bases.get(basis.as_str()).ok_or_else(|| missing(basis))?;
                let terms: Vec<(&str, C64)> = terms.iter().map(|(c, l)| (l.as_str(), *c)).collect();
                let ket = StateVector::from_terms(b, &terms)
                    .and_then(|s| s.normalize())
                    .map_err(|e| structural(e.to_string()))?;
                kets.insert(name, ket);
            }
            Statement::Op { name, def } => {
                let op = match def {
                    OpDef::Proj(k) => {
                        projector_onto(kets.get(k.as_str()).ok_or_else(|| missing(k))?)
                            .map_err(|e| structural(e.to_string()))?
                    }
                    OpDef::ProjLabel { basis, label } => {
                        let b = bases.get(basis.as_str()).ok_or_else(|| missing(basis))?;
                        StateVector::basis_ket(b, label)
                            .and_then(|k| projector_onto(&k))
                            .map_err(|e| structural(e.to_string()))?
                    }
                    OpDef::Sum(a, b) => {
                        let a_op = ops.get(a.as_str()).ok_or_else(|| missing(a))?;
                        let b_op = ops.get(b.as_str()).ok_or_else(|| missing(b))?;
                        a_op.add(b_op).map_err(|e| structural(e.to_string()))?
                    }
                    OpDef::Scaled(f, a) => ops
                        .get(a.as_str())
                        .ok_or_else(|| missing(a))?
                        .scale(C64::new(*f, 0.0)),
                };
                ops.insert(name, op);
            }
            Statement::Unitary {
                name,
                from,
                to,
                def,
            } => {
                let from_b = bases.get(from.as_str()).ok_or_else(|| missing(from))?;
                let to_b = bases.get(to.as_str()).ok_or_else(|| missing(to))?;
                let u = match def {
                    UnitaryDef::Splitter { q, r, beta } => {
                        let n = (q * q + r * r).sqrt();
                        BeamSplitter::new(q / n, r / n, *beta)
                            .and_then(|bs| bs.unitary(from_b, to_b))
                            .map_err(|e| structural(e.to_string()))?
                    }
                    UnitaryDef::Rows(rows) => {
                        let m = OperatorMatrix::new(from_b.clone(), to_b.clone(), rows.concat())
                            .map_err(|e| structural(e.to_string()))?;
                        orthonormalize_columns(&m)
                    }
                };
                unitaries.insert(name, u);
            }
            Statement::Query {
                kind,
                op,
                pre,
                post,
                via,
            } => {
                query_index += 1;
                let key = format!("{query_index:03}:{op}");
                let op_m = ops.get(op.as_str()).ok_or_else(|| missing(op))?;
                let pre_k = kets.get(pre.as_str()).ok_or_else(|| missing(pre))?;
                let post_k = kets.get(post.as_str()).ok_or_else(|| missing(post))?;
                let pp = match via {
                    Some(u) => {
                        let u_m = unitaries.get(u.as_str()).ok_or_else(|| missing(u))?;
                        PrePost::with_evolution(pre_k, post_k, u_m.clone())
                    }
                    None => PrePost::new(pre_k, post_k),
                }
                .map_err(|e| structural(e.to_string()))?;

                let via_text = via
                    .as_ref()
                    .map(|u| format!(" via {u}"))
                    .unwrap_or_default();
                report.notes.push(format!(
                    "{key}: {kind} {op} pre {pre} post {post}{via_text}"
                ));
                report
                    .amplitudes
                    .insert(format!("{query_index:03}:overlap"), pp.overlap());
                match kind {
                    QueryKind::Weak => {
                        report.weak_values.insert(key, weak_value(op_m, &pp));
                    }
                    QueryKind::Abl => {
                        let spec = if is_projector(op_m) {
                            SpectralData::for_projector(op_m)
                        } else {
                            eigendecompose_hermitian(op_m)
                        };
                        let dist = spec.and_then(|s| abl_probability(&s, &pp));
                        report.abl.insert(key, dist);
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Number of queries in `report` that produced a value.
pub fn defined_results(report: &ScenarioReport) -> usize {
    report.weak_values.values().filter(|e| e.is_ok()).count()
        + report.abl.values().filter(|e| e.is_ok()).count()
}

/// Convenience: parse then evaluate, mapping both failure kinds.
pub fn run(source: &str) -> Result<ScenarioReport, DslError> {
    let program = parse(source)?;
    Ok(evaluate(&program)?)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
