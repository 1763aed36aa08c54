//! Experiment driver: problem construction, right-hand-side sequences,
//! solver pipelines over the sequence, CSV histories and their summaries.
//!
//! # Config grammar
//!
//! One `key = value` per line; `#` starts a comment. Keys:
//!
//! | key        | value                                                        |
//! |------------|--------------------------------------------------------------|
//! | `preset`   | `ocean`, `cdr`, `poisson`, `termination-lab` (applied first)   |
//! | `problem`  | `poisson m=100`, `tridiag n=100 sub=3 diag=2 sup=-1`, `cdr h=1/16`, `mtx path=FILE` |
//! | `rhs`      | `sequence z=10` or a list such as `ones random`                |
//! | `pipeline` | stages separated by `;`, each `name` or `name(k=v,k=v)`        |
//! | `tol`, `seed`, `max_mv`, `out` | scalars / output path                    |
//!
//! Pipeline stages, in order: one first solve (`rgcr`, `idr`, `bicg`,
//! `lanczos`), an optional recycled solve (`sridr`, `srcg`, `srmr`, `srbicg`,
//! `blocked`), an optional `apost`, and an optional reference solver
//! (`ref_idr`, `ref_bicg`) run on every right-hand side.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apost::{apost_init, apost_until};
use crate::blocking::{blocked_recycle_solve, split_blocks, uniform_block_sizes, BlockedRecycleData};
use crate::error::{Error, Result};
use crate::linalg::dense::random_vec;
use crate::linalg::{norm2, CsrMatrix, CsrOperator, LinearOperator, Mat};
use crate::problems::{gen_cdr3d, gen_poisson2d, gen_rhs_sequence, gen_tridiag, read_matrix_market, BandLu, CdrParams};
use crate::shortrep::{srbicg_solve, srcg_solve, srmr_solve, Basis, ShortRepresentation};
use crate::solvers::{
    bicg_bilanczos, idr_s_solve, rgcr_solve, sym_lanczos_solve, Approach, BiLanczosData, BiLanczosOptions, Capture, IdrOptions, LanczosData,
    LanczosMode, Marker, SolveReport,
};
use crate::sridr::{sridr_solve, SonneveldRecycleData, SridrOptions};

pub const CSV_HEADER: [&str; 5] = ["method", "rhs_index", "mv_count", "true_resnorm", "marker"];
pub const PRESETS: [&str; 4] = ["ocean", "cdr", "poisson", "termination-lab"];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// `key=value` pairs of one stage or problem spec.
struct Params {
    map: HashMap<String, String>,
    ctx: String,
}

impl Params {
    fn parse<'a>(ctx: &str, items: impl Iterator<Item = &'a str>) -> Result<Self> {
        let mut map = HashMap::new();
        for it in items.map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = it.split_once('=').ok_or_else(|| cfg_err(format!("{ctx}: expected key=value, found {it:?}")))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(cfg_err(format!("{ctx}: duplicate key {k}")));
            }
        }
        Ok(Params { map, ctx: ctx.to_string() })
    }

    fn take(&mut self, k: &str) -> Option<String> {
        self.map.remove(k)
    }

    fn num<V: FromStr>(&mut self, k: &str) -> Result<Option<V>> {
        match self.take(k) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| cfg_err(format!("{}: bad value {v:?} for {k}", self.ctx))),
        }
    }

    fn req<V: FromStr>(&mut self, k: &str) -> Result<V> {
        self.num(k)?.ok_or_else(|| cfg_err(format!("{}: missing {k}", self.ctx)))
    }

    fn approach(&mut self) -> Result<Approach> {
        match self.take("approach").as_deref() {
            None | Some("V") | Some("v") => Ok(Approach::V),
            Some("U") | Some("u") => Ok(Approach::U),
            Some(o) => Err(cfg_err(format!("{}: approach must be U or V, got {o}", self.ctx))),
        }
    }

    fn done(self) -> Result<()> {
        match self.map.keys().min() {
            Some(k) => Err(cfg_err(format!("{}: unknown parameter {k}", self.ctx))),
            None => Ok(()),
        }
    }
}

fn parse_fraction(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.parse().ok(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Poisson { m: usize },
    Tridiag { n: usize, sub: f64, diag: f64, sup: f64 },
    Cdr { h: f64 },
    Mtx { path: PathBuf },
}

impl FromStr for ProblemSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let kind = it.next().ok_or_else(|| cfg_err("empty problem"))?;
        let mut p = Params::parse(kind, it)?;
        let spec = match kind {
            "poisson" => ProblemSpec::Poisson { m: p.req("m")? },
            "tridiag" => ProblemSpec::Tridiag {
                n: p.req("n")?,
                sub: p.num("sub")?.unwrap_or(3.0),
                diag: p.num("diag")?.unwrap_or(2.0),
                sup: p.num("sup")?.unwrap_or(-1.0),
            },
            "cdr" => {
                let h = p.take("h").ok_or_else(|| cfg_err("cdr: missing h"))?;
                let h = parse_fraction(&h).ok_or_else(|| cfg_err(format!("cdr: bad h {h:?}")))?;
                let steps = 1.0 / h;
                if !(steps >= 2.0 && (steps - steps.round()).abs() < 1e-9) {
                    return Err(cfg_err(format!("cdr: 1/h must be an integer >= 2, got {steps}")));
                }
                ProblemSpec::Cdr { h }
            }
            "mtx" => ProblemSpec::Mtx { path: PathBuf::from(p.take("path").ok_or_else(|| cfg_err("mtx: missing path"))?) },
            o => return Err(cfg_err(format!("unknown problem {o:?}"))),
        };
        p.done()?;
        if matches!(spec, ProblemSpec::Poisson { m: 0 } | ProblemSpec::Tridiag { n: 0, .. }) {
            return Err(cfg_err("problem size must be positive"));
        }
        Ok(spec)
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemSpec::Poisson { m } => write!(f, "poisson m={m}"),
            ProblemSpec::Tridiag { n, sub, diag, sup } => write!(f, "tridiag n={n} sub={sub} diag={diag} sup={sup}"),
            ProblemSpec::Cdr { h } => write!(f, "cdr h=1/{}", (1.0 / h).round()),
            ProblemSpec::Mtx { path } => write!(f, "mtx path={}", path.display()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhsKind {
    Ones,
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RhsSpec {
    /// Orthonormalized reverse Krylov block from the ones vector, `z + 1` columns.
    Sequence { z: usize },
    List(Vec<RhsKind>),
}

impl FromStr for RhsSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let words: Vec<&str> = s.split(|c: char| c.is_whitespace() || c == ',').filter(|w| !w.is_empty()).collect();
        match words.first() {
            Some(&"sequence") => {
                let mut p = Params::parse("sequence", words[1..].iter().copied())?;
                let z = p.req("z")?;
                p.done()?;
                Ok(RhsSpec::Sequence { z })
            }
            Some(_) => words
                .iter()
                .map(|w| match *w {
                    "ones" => Ok(RhsKind::Ones),
                    "random" => Ok(RhsKind::Random),
                    o => Err(cfg_err(format!("unknown rhs kind {o:?}"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(RhsSpec::List),
            None => Err(cfg_err("empty rhs spec")),
        }
    }
}

impl fmt::Display for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RhsSpec::Sequence { z } => write!(f, "sequence z={z}"),
            RhsSpec::List(l) => {
                let w: Vec<&str> = l.iter().map(|k| if *k == RhsKind::Ones { "ones" } else { "random" }).collect();
                write!(f, "{}", w.join(" "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FirstStage {
    Rgcr { maxit: usize },
    Idr { s: usize, capture: Capture },
    Bicg { n: usize, approach: Approach },
    Lanczos { n: usize, mode: LanczosMode, approach: Approach },
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecycleStage {
    Sridr { cycles: Option<usize> },
    Srcg { j: usize },
    Srmr { j: usize },
    Srbicg { j: usize },
    Blocked { l: usize, j: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApostStage {
    pub s: usize,
    pub max_mv: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    Idr { s: usize },
    Bicg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    pub first: FirstStage,
    pub recycle: Option<RecycleStage>,
    pub apost: Option<ApostStage>,
    pub reference: Option<Reference>,
    text: String,
}

fn split_stage(s: &str) -> Result<(&str, &str)> {
    let s = s.trim();
    match s.find('(') {
        Some(i) if s.ends_with(')') => Ok((s[..i].trim(), &s[i + 1..s.len() - 1])),
        Some(_) => Err(cfg_err(format!("unbalanced stage {s:?}"))),
        None => Ok((s, "")),
    }
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(text: &str) -> Result<Self> {
        let mut first = None;
        let mut recycle = None;
        let mut apost = None;
        let mut reference = None;
        for raw in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, args) = split_stage(raw)?;
            let mut p = Params::parse(name, args.split(','))?;
            let order_err = || cfg_err(format!("stage {name} out of order in {text:?}"));
            match name {
                "rgcr" | "idr" | "bicg" | "lanczos" => {
                    if first.is_some() {
                        return Err(order_err());
                    }
                    first = Some(match name {
                        "rgcr" => FirstStage::Rgcr { maxit: p.num("maxit")?.unwrap_or(5000) },
                        "idr" => {
                            let s = p.req("s")?;
                            let capture = match p.take("capture").as_deref() {
                                None | Some("none") => Capture::None,
                                Some("max") => Capture::Max,
                                Some(v) => Capture::At(v.parse().map_err(|_| cfg_err(format!("idr: bad capture {v:?}")))?),
                            };
                            FirstStage::Idr { s, capture }
                        }
                        "bicg" => FirstStage::Bicg { n: p.req("n")?, approach: p.approach()? },
                        _ => {
                            let mode = match p.take("mode").as_deref() {
                                None | Some("cg") => LanczosMode::Cg,
                                Some("minres") => LanczosMode::Minres,
                                Some(o) => return Err(cfg_err(format!("lanczos: unknown mode {o}"))),
                            };
                            FirstStage::Lanczos { n: p.req("n")?, mode, approach: p.approach()? }
                        }
                    });
                }
                "sridr" | "srcg" | "srmr" | "srbicg" | "blocked" => {
                    if first.is_none() || recycle.is_some() || apost.is_some() || reference.is_some() {
                        return Err(order_err());
                    }
                    recycle = Some(match name {
                        "sridr" => RecycleStage::Sridr { cycles: p.num("cycles")? },
                        "srcg" => RecycleStage::Srcg { j: p.req("J")? },
                        "srmr" => RecycleStage::Srmr { j: p.req("J")? },
                        "srbicg" => RecycleStage::Srbicg { j: p.req("J")? },
                        _ => RecycleStage::Blocked { l: p.req("l")?, j: p.req("J")? },
                    });
                }
                "apost" => {
                    if recycle.is_none() || apost.is_some() || reference.is_some() {
                        return Err(order_err());
                    }
                    apost = Some(ApostStage { s: p.num("s")?.unwrap_or(1), max_mv: p.num("max_mv")?.unwrap_or(1000) });
                }
                "ref_idr" | "ref_bicg" => {
                    if first.is_none() || reference.is_some() {
                        return Err(order_err());
                    }
                    reference = Some(if name == "ref_idr" { Reference::Idr { s: p.req("s")? } } else { Reference::Bicg });
                }
                o => return Err(cfg_err(format!("unknown stage {o:?}"))),
            }
            p.done()?;
        }
        let first = first.ok_or_else(|| cfg_err("pipeline needs a first-solve stage"))?;
        let pl = Pipeline { first, recycle, apost, reference, text: text.trim().to_string() };
        pl.validate()?;
        Ok(pl)
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Pipeline {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(cfg_err(m.to_string()));
        let positive = |v: usize, what: &str| if v == 0 { Err(cfg_err(format!("{what} must be positive"))) } else { Ok(()) };
        match &self.first {
            FirstStage::Idr { s, capture } => {
                positive(*s, "idr s")?;
                if matches!(self.recycle, Some(RecycleStage::Sridr { .. })) && *capture == Capture::None {
                    return bad("sridr needs idr(capture=max) or capture=J");
                }
            }
            FirstStage::Bicg { n, .. } | FirstStage::Lanczos { n, .. } => positive(*n, "basis size n")?,
            FirstStage::Rgcr { maxit } => positive(*maxit, "rgcr maxit")?,
        }
        match (&self.first, &self.recycle) {
            (_, None) => {}
            (FirstStage::Idr { .. }, Some(RecycleStage::Sridr { .. })) => {}
            (FirstStage::Lanczos { n, mode, approach }, Some(RecycleStage::Srcg { j } | RecycleStage::Srmr { j })) => {
                if *j == 0 || j > n {
                    return bad("stride J must lie in 1..=n");
                }
                if matches!(self.recycle, Some(RecycleStage::Srcg { .. })) && (*mode != LanczosMode::Cg || *approach != Approach::V) {
                    return bad("srcg needs lanczos(mode=cg, approach=V)");
                }
            }
            (FirstStage::Bicg { n, approach }, Some(RecycleStage::Srbicg { j })) => {
                let _ = approach;
                if *j == 0 || j > n {
                    return bad("stride J must lie in 1..=n");
                }
            }
            (FirstStage::Bicg { n, approach }, Some(RecycleStage::Blocked { l, j })) => {
                if *l == 0 || *j == 0 || n / l < *j {
                    return bad("blocked needs l >= 1 and J <= n / l");
                }
                if *l > 1 && *approach != Approach::U {
                    return bad("blocked with l > 1 needs bicg(approach=U)");
                }
            }
            (f, Some(r)) => return Err(cfg_err(format!("{r:?} cannot recycle the payload of {f:?}"))),
        }
        if let Some(a) = &self.apost {
            positive(a.s, "apost s")?;
            let ok = matches!(self.first, FirstStage::Bicg { approach: Approach::U, .. })
                && matches!(self.recycle, Some(RecycleStage::Srbicg { .. } | RecycleStage::Blocked { .. }));
            if !ok {
                return bad("apost follows srbicg or blocked on a bicg(approach=U) payload");
            }
        }
        if let Some(Reference::Idr { s }) = &self.reference {
            positive(*s, "ref_idr s")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub rhs: RhsSpec,
    pub pipeline: Pipeline,
    pub tol: f64,
    pub seed: u64,
    pub max_mv: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (problem, rhs, pipeline) = match name {
            "termination-lab" => ("tridiag n=100 sub=3 diag=2 sup=-1", "ones ones random", "idr(s=20,capture=max); sridr"),
            "poisson" => ("poisson m=100", "sequence z=10", "bicg(n=200,approach=U); blocked(l=4,J=5); apost(s=1,max_mv=4000)"),
            // the external suite's right-hand side is replaced by a ones-based sequence
            "cdr" => ("cdr h=1/16", "sequence z=5", "idr(s=4,capture=max); sridr; ref_idr(s=4)"),
            "ocean" => ("mtx path=stommel_4.mtx", "sequence z=11", "rgcr(maxit=2000)"),
            o => return Err(cfg_err(format!("unknown preset {o:?}; known: {}", PRESETS.join(", ")))),
        };
        Ok(ExperimentConfig {
            problem: problem.parse()?,
            rhs: rhs.parse()?,
            pipeline: pipeline.parse()?,
            tol: 1e-8,
            seed: 1,
            max_mv: 5000,
            out: None,
        })
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "preset" => {
                let out = self.out.take();
                *self = Self::preset(v)?;
                self.out = out;
            }
            "problem" => self.problem = v.parse()?,
            "rhs" => self.rhs = v.parse()?,
            "pipeline" => self.pipeline = v.parse()?,
            "tol" => {
                self.tol = v.parse().map_err(|_| cfg_err(format!("bad tol {v:?}")))?;
                if !(self.tol > 0.0 && self.tol < 1.0) {
                    return Err(cfg_err("tol must lie in (0, 1)"));
                }
            }
            "seed" => self.seed = v.parse().map_err(|_| cfg_err(format!("bad seed {v:?}")))?,
            "max_mv" => self.max_mv = v.parse().map_err(|_| cfg_err(format!("bad max_mv {v:?}")))?,
            "out" => self.out = Some(PathBuf::from(v)),
            k => return Err(cfg_err(format!("unknown key {k:?}"))),
        }
        Ok(())
    }

    /// Parses the flat config grammar. Without a `preset` line the file
    /// must name `problem`, `rhs` and `pipeline`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| cfg_err(format!("line {}: expected key = value", no + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let base = match pairs.iter().position(|(k, _)| k == "preset") {
            Some(i) => Self::preset(&pairs.remove(i).1)?,
            None => {
                let get = |k: &str| pairs.iter().find(|p| p.0 == k).map(|p| p.1.clone()).ok_or_else(|| cfg_err(format!("missing {k} (or a preset)")));
                ExperimentConfig {
                    problem: get("problem")?.parse()?,
                    rhs: get("rhs")?.parse()?,
                    pipeline: get("pipeline")?.parse()?,
                    tol: 1e-8,
                    seed: 1,
                    max_mv: 5000,
                    out: None,
                }
            }
        };
        let mut cfg = base;
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Round-trippable text form.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "problem = {}\nrhs = {}\npipeline = {}\ntol = {:e}\nseed = {}\nmax_mv = {}\n",
            self.problem, self.rhs, self.pipeline, self.tol, self.seed, self.max_mv
        );
        if let Some(o) = &self.out {
            s.push_str(&format!("out = {}\n", o.display()));
        }
        s
    }
}

/// Builds the system matrix; `Ok(None)` when a Matrix Market file is absent.
pub fn build_problem(spec: &ProblemSpec) -> Result<Option<CsrMatrix<f64>>> {
    Ok(Some(match spec {
        ProblemSpec::Poisson { m } => gen_poisson2d(*m),
        ProblemSpec::Tridiag { n, sub, diag, sup } => gen_tridiag(*sub, *diag, *sup, *n),
        ProblemSpec::Cdr { h } => gen_cdr3d(*h, CdrParams::default()),
        ProblemSpec::Mtx { path } => {
            if !path.exists() {
                return Ok(None);
            }
            read_matrix_market(path)?
        }
    }))
}

/// Right-hand sides as columns.
pub fn build_rhs(a: &CsrMatrix<f64>, spec: &RhsSpec, seed: u64) -> Result<Mat<f64>> {
    let n = a.nrows();
    match spec {
        RhsSpec::Sequence { z } => {
            let lu = BandLu::new(a)?;
            gen_rhs_sequence(|x| Ok(lu.solve(x)), &vec![1.0; n], *z)
        }
        RhsSpec::List(kinds) => {
            let mut m = Mat::zeros(n, 0);
            for (i, k) in kinds.iter().enumerate() {
                match k {
                    RhsKind::Ones => m.push_col(&vec![1.0; n]),
                    RhsKind::Random => m.push_col(&random_vec(n, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64)))),
                }
            }
            Ok(m)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub method: String,
    pub rhs_index: usize,
    pub mv_count: usize,
    pub true_resnorm: f64,
    pub marker: Marker,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    First,
    /// Payload-building run whose own iterate is not the answer.
    Payload,
    Recycled,
    Reference,
}

#[derive(Clone, Debug)]
pub struct StageStatus {
    pub method: String,
    pub rhs_index: usize,
    pub role: Role,
    pub converged: bool,
    pub mv_total: usize,
    pub rd_total: usize,
    pub cycles: usize,
    pub rel_resnorm: f64,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutcome {
    pub rows: Vec<Row>,
    pub stages: Vec<StageStatus>,
    /// Set when the run was skipped (missing external matrix).
    pub skipped: Option<String>,
}

impl ExperimentOutcome {
    /// False when any solve that counts did not reach the tolerance.
    pub fn all_converged(&self) -> bool {
        self.stages.iter().filter(|s| s.role != Role::Payload).all(|s| s.converged)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.rows, w)
    }
}

pub fn write_rows<W: Write>(rows: &[Row], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.write_record([
            r.method.as_str(),
            &r.rhs_index.to_string(),
            &r.mv_count.to_string(),
            &format!("{:.15e}", r.true_resnorm),
            r.marker.as_str(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

impl ExperimentOutcome {
    fn push(&mut self, role: Role, rhs_index: usize, rep: &SolveReport<f64>) {
        let mut marks: Vec<Marker> = vec![Marker::None; rep.history.len()];
        for &(mv, m) in &rep.markers {
            // unsampled marks attach to the next recorded point
            if let Some(i) = rep.history.iter().position(|h| h.0 >= mv) {
                marks[i] = m;
            }
        }
        for ((mv, res), m) in rep.history.iter().zip(marks) {
            self.rows.push(Row { method: rep.method.clone(), rhs_index, mv_count: *mv, true_resnorm: *res, marker: m });
        }
        self.stages.push(StageStatus {
            method: rep.method.clone(),
            rhs_index,
            role,
            converged: rep.converged,
            mv_total: rep.mv_total,
            rd_total: rep.rd_total,
            cycles: rep.cycles,
            rel_resnorm: rep.relative_resnorm(),
            notes: rep.notes.clone(),
        });
    }

    fn fail(&mut self, method: String, rhs_index: usize, role: Role, err: &Error) {
        self.stages.push(StageStatus {
            method,
            rhs_index,
            role,
            converged: false,
            mv_total: 0,
            rd_total: 0,
            cycles: 0,
            rel_resnorm: f64::NAN,
            notes: vec![format!("error: {err}")],
        });
    }
}

enum Source {
    Rgcr { u: Mat<f64>, v: Mat<f64> },
    Sonneveld(SonneveldRecycleData<f64>),
    BiLanczos(BiLanczosData<f64>),
    Lanczos(LanczosData<f64>),
    Missing,
}

enum Prepared {
    Short { main: ShortRepresentation<f64>, w: Option<ShortRepresentation<f64>> },
    Blocked(BlockedRecycleData<f64>),
    None,
}

fn recycle_label(r: &RecycleStage) -> &'static str {
    match r {
        RecycleStage::Sridr { .. } => "sridr",
        RecycleStage::Srcg { .. } => "srcg",
        RecycleStage::Srmr { .. } => "srmr",
        RecycleStage::Srbicg { .. } => "srbicg",
        RecycleStage::Blocked { .. } => "srbicg_blocked",
    }
}

/// Runs the pipeline over all right-hand sides, strictly in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let Some(a) = build_problem(&cfg.problem)? else {
        return Ok(ExperimentOutcome { skipped: Some(format!("matrix file for `{}` not found", cfg.problem)), ..Default::default() });
    };
    let rhs = build_rhs(&a, &cfg.rhs, cfg.seed)?;
    run_on(&a, &rhs, cfg)
}

/// As [`run_experiment`] with a prebuilt matrix and right-hand sides.
pub fn run_on(a: &CsrMatrix<f64>, rhs: &Mat<f64>, cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if rhs.nrows() != a.nrows() {
        return Err(cfg_err(format!("rhs length {} differs from N = {}", rhs.nrows(), a.nrows())));
    }
    let op = CsrOperator::new(a);
    let pl = &cfg.pipeline;
    let mut out = ExperimentOutcome::default();
    let z = rhs.ncols();
    if z == 0 {
        return Ok(out);
    }
    let extra = pl.apost.as_ref().map_or(0, |p| p.s - 1);
    let b0 = rhs.col(0);
    let mut source = match &pl.first {
        FirstStage::Rgcr { maxit } => match rgcr_solve(&op, Mat::zeros(0, 0), Mat::zeros(0, 0), b0, cfg.tol, *maxit) {
            Ok((u, v, mut rep)) => {
                rep.method = "rgcr(m0=0)".into();
                out.push(Role::First, 0, &rep);
                Source::Rgcr { u, v }
            }
            Err(e) => {
                out.fail("rgcr(m0=0)".into(), 0, Role::First, &e);
                Source::Missing
            }
        },
        FirstStage::Idr { s, capture } => {
            let mut o = IdrOptions::new(*s, cfg.tol);
            o.max_mv = cfg.max_mv;
            o.seed = cfg.seed;
            o.capture = *capture;
            match idr_s_solve(&op, b0, &o) {
                Ok((rep, payload)) => {
                    out.push(Role::First, 0, &rep);
                    payload.map_or(Source::Missing, Source::Sonneveld)
                }
                Err(e) => {
                    out.fail(format!("idr(s={s})"), 0, Role::First, &e);
                    Source::Missing
                }
            }
        }
        FirstStage::Bicg { n, approach } => {
            let mut o = BiLanczosOptions::new(*approach, *n, cfg.tol);
            o.extra = extra;
            let res = if *approach == Approach::U {
                // preimage iterates drift once the residual is small, so the
                // payload run stops at the capture point and a V run solves b₀
                o.max_steps = *n;
                let payload = bicg_bilanczos(&op, b0, &o);
                if let Ok((_, rep)) = &payload {
                    let mut rep = rep.clone();
                    rep.method = "bicg(U;payload)".into();
                    out.push(Role::Payload, 0, &rep);
                }
                let mut ov = BiLanczosOptions::new(Approach::V, 1, cfg.tol);
                ov.max_steps = cfg.max_mv / 2;
                match bicg_bilanczos(&op, b0, &ov) {
                    Ok((_, rep)) => out.push(Role::First, 0, &rep),
                    Err(e) => out.fail("bicg(V)".into(), 0, Role::First, &e),
                }
                payload.map(|p| p.0)
            } else {
                o.max_steps = cfg.max_mv / 2;
                bicg_bilanczos(&op, b0, &o).map(|(d, rep)| {
                    out.push(Role::First, 0, &rep);
                    d
                })
            };
            match res {
                Ok(d) => Source::BiLanczos(d),
                Err(e) => {
                    out.fail(format!("bicg(n={n})"), 0, Role::Payload, &e);
                    Source::Missing
                }
            }
        }
        FirstStage::Lanczos { n, mode, approach } => match sym_lanczos_solve(&op, b0, *n, *mode, *approach, cfg.tol, cfg.max_mv) {
            Ok((d, rep)) => {
                out.push(Role::First, 0, &rep);
                Source::Lanczos(d)
            }
            Err(e) => {
                out.fail("lanczos".into(), 0, Role::First, &e);
                Source::Missing
            }
        },
    };

    let prepared: std::result::Result<Prepared, Error> = match (&pl.recycle, &source) {
        (Some(RecycleStage::Srcg { j } | RecycleStage::Srmr { j }), Source::Lanczos(d)) => {
            let basis = if d.approach == Approach::U { Basis::U } else { Basis::V };
            ShortRepresentation::from_lanczos(d, basis, *j).map(|main| Prepared::Short { main, w: None })
        }
        (Some(RecycleStage::Srbicg { j }), Source::BiLanczos(d)) => {
            let basis = if d.approach == Approach::U { Basis::U } else { Basis::V };
            ShortRepresentation::from_bilanczos(d, basis, *j)
                .and_then(|main| Ok(Prepared::Short { main, w: Some(ShortRepresentation::from_bilanczos(d, Basis::W, *j)?) }))
        }
        (Some(RecycleStage::Blocked { l, j }), Source::BiLanczos(d)) => {
            split_blocks(&op, d, &uniform_block_sizes(d.n, *l), &[*j]).map(Prepared::Blocked)
        }
        (Some(RecycleStage::Sridr { .. }), Source::Sonneveld(_)) | (None, _) => Ok(Prepared::None),
        (Some(r), _) => Err(cfg_err(format!("no usable payload for {}", recycle_label(r)))),
    };

    for i in 1..z {
        let b = rhs.col(i);
        if let Source::Rgcr { u, v } = &mut source {
            let label = format!("rgcr(m0={})", v.ncols());
            match rgcr_solve(&op, std::mem::replace(u, Mat::zeros(0, 0)), std::mem::replace(v, Mat::zeros(0, 0)), b, cfg.tol, match pl.first {
                FirstStage::Rgcr { maxit } => maxit,
                _ => unreachable!(),
            }) {
                Ok((nu, nv, mut rep)) => {
                    rep.method = label;
                    out.push(Role::Recycled, i, &rep);
                    *u = nu;
                    *v = nv;
                }
                Err(e) => {
                    out.fail(label, i, Role::Recycled, &e);
                    source = Source::Missing;
                }
            }
        }
        if let Some(stage) = &pl.recycle {
            match recycled_chain(&op, b, cfg, stage, &source, &prepared, i) {
                Ok(rep) => out.push(Role::Recycled, i, &rep),
                Err(e) => out.fail(recycle_label(stage).into(), i, Role::Recycled, &e),
            }
        }
    }
    if let Some(r) = &pl.reference {
        for i in 0..z {
            let b = rhs.col(i);
            let res = match r {
                Reference::Idr { s } => {
                    let mut o = IdrOptions::new(*s, cfg.tol);
                    o.max_mv = cfg.max_mv;
                    o.seed = cfg.seed;
                    idr_s_solve(&op, b, &o).map(|p| p.0)
                }
                Reference::Bicg => {
                    let mut o = BiLanczosOptions::new(Approach::V, 1, cfg.tol);
                    o.max_steps = cfg.max_mv / 2;
                    bicg_bilanczos(&op, b, &o).map(|p| p.1)
                }
            };
            match res {
                Ok(mut rep) => {
                    rep.method = format!("ref:{}", rep.method);
                    out.push(Role::Reference, i, &rep);
                }
                Err(e) => {
                    let name = match r {
                        Reference::Idr { s } => format!("ref:idr(s={s})"),
                        Reference::Bicg => "ref:bicg(V)".into(),
                    };
                    out.fail(name, i, Role::Reference, &e)
                }
            }
        }
    }
    Ok(out)
}

fn recycled_chain(
    op: &CsrOperator<'_, f64>,
    b: &[f64],
    cfg: &ExperimentConfig,
    stage: &RecycleStage,
    source: &Source,
    prepared: &std::result::Result<Prepared, Error>,
    i: usize,
) -> Result<SolveReport<f64>> {
    let prepared = prepared.as_ref().map_err(|e| cfg_err(e.to_string()))?;
    let mut rep = match (stage, source, prepared) {
        (RecycleStage::Sridr { cycles }, Source::Sonneveld(d), _) => {
            let mut o = SridrOptions::new(cfg.tol);
            o.max_mv = cfg.max_mv;
            sridr_solve(op, b, d, *cycles, &o)?.0
        }
        (RecycleStage::Srcg { .. }, _, Prepared::Short { main, .. }) => srcg_solve(main, op, b, cfg.tol)?,
        (RecycleStage::Srmr { .. }, Source::Lanczos(d), Prepared::Short { main, .. }) => srmr_solve(main, op, b, d.approach, cfg.tol)?,
        (RecycleStage::Srbicg { .. }, Source::BiLanczos(d), Prepared::Short { main, w: Some(w) }) => srbicg_solve(main, w, op, b, d.approach, cfg.tol)?,
        (RecycleStage::Blocked { .. }, _, Prepared::Blocked(bd)) => blocked_recycle_solve(op, b, bd, cfg.tol)?,
        _ => return Err(cfg_err(format!("rhs {i}: first solve produced no payload"))),
    };
    if let (Some(ap), Source::BiLanczos(d)) = (&cfg.pipeline.apost, source) {
        let from = rep.mv_total;
        rep.method = format!("{}+apost(s={};from={from})", rep.method, ap.s);
        if !rep.converged {
            let st = apost_init(op, b, d, rep.x.clone(), ap.s, cfg.seed.wrapping_add(i as u64))?;
            let st = apost_until(st, op, cfg.tol, ap.max_mv);
            let fin = st.true_resnorm(op);
            for &(mv, res) in st.history.iter().skip(1) {
                rep.history.push((from + mv, res));
            }
            if rep.history.last().map(|h| h.0) != Some(from + st.mv) {
                rep.history.push((from + st.mv, fin));
            }
            rep.converged = fin <= cfg.tol * norm2(b);
            rep.mv_total = from + st.mv;
            rep.mv_physical += st.mv;
            rep.rd_total += ap.s * st.cycles;
            rep.cycles += st.cycles;
            rep.x = st.x;
            if st.stalled {
                rep.notes.push("post-iteration stalled".into());
            }
        }
    }
    Ok(rep)
}

/// Test-space dimension after `mv` products, reconstructed from a method label.
pub fn rd_at(method: &str, mv: usize) -> Option<usize> {
    let method = method.strip_prefix("ref:").unwrap_or(method);
    if let Some((base, post)) = method.split_once('+') {
        let p = label_params(post.strip_prefix("apost")?)?;
        let (s, from) = (*p.get("s")?, *p.get("from")?);
        let base_rd = rd_at(base, mv.min(from))?;
        return Some(base_rd + s * (mv.saturating_sub(from) / (s + 1)));
    }
    let (name, rest) = method.split_at(method.find('(')?);
    let p = label_params(rest)?;
    match name {
        "sridr" => {
            let (s, j) = (*p.get("s")?, *p.get("jstar")?);
            let rec = mv.min(j);
            Some(s * rec + s * ((mv - rec) / (s + 1)))
        }
        "idr" => {
            let s = *p.get("s")?;
            Some(s * (mv / (s + 1)))
        }
        "srcg" | "srmr" | "srbicg" | "srbicg_dual" | "srbicg_blocked" | "srz" => Some(if mv == 0 { 0 } else { *p.get("n")? }),
        "bicg" => Some(mv / 2),
        "lanczos" | "zlanczos" => Some(mv),
        "rgcr" => Some(p.get("m0")? + mv),
        _ => None,
    }
}

/// Numeric `key=value` entries of `(a=1;b=2;tag)`.
fn label_params(s: &str) -> Option<HashMap<String, usize>> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    Some(
        inner
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .filter_map(|(k, v)| v.parse().ok().map(|v| (k.to_string(), v)))
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub rhs_index: usize,
    /// First mv count with relative residual `≤ tol`.
    pub mv_to_tol: Option<usize>,
    /// Relative to the first record of the series.
    pub final_resnorm: f64,
    pub mv_total: usize,
    pub rd_total: Option<usize>,
}

impl SummaryRow {
    /// `rd_total / mv_total` as a reduced fraction.
    pub fn ratio(&self) -> Option<(usize, usize)> {
        let rd = self.rd_total?;
        if self.mv_total == 0 {
            return None;
        }
        let g = gcd(rd, self.mv_total).max(1);
        Some((rd / g, self.mv_total / g))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<Row>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rd.headers()?.clone();
    if header.is_empty() {
        return Ok(Vec::new());
    }
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 2));
        rows.push(Row {
            method: rec[0].to_string(),
            rhs_index: rec[1].parse().map_err(|_| bad("rhs_index"))?,
            mv_count: rec[2].parse().map_err(|_| bad("mv_count"))?,
            true_resnorm: rec[3].parse().map_err(|_| bad("true_resnorm"))?,
            marker: Marker::parse(&rec[4]).ok_or_else(|| bad("marker"))?,
        });
    }
    Ok(rows)
}

/// Per `(method, rhs_index)` series in order of first appearance.
pub fn summarize_rows(rows: &[Row], tol: f64) -> Vec<SummaryRow> {
    let mut order: Vec<(String, usize)> = Vec::new();
    let mut series: HashMap<(String, usize), Vec<&Row>> = HashMap::new();
    for r in rows {
        let key = (r.method.clone(), r.rhs_index);
        if !series.contains_key(&key) {
            order.push(key.clone());
        }
        series.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let s = &series[&key];
            let r0 = s[0].true_resnorm;
            let rel = |v: f64| if r0 > 0.0 { v / r0 } else { v };
            let last = s[s.len() - 1];
            SummaryRow {
                mv_to_tol: s.iter().find(|r| rel(r.true_resnorm) <= tol).map(|r| r.mv_count),
                final_resnorm: rel(last.true_resnorm),
                mv_total: last.mv_count,
                rd_total: rd_at(&key.0, last.mv_count),
                method: key.0,
                rhs_index: key.1,
            }
        })
        .collect()
}

pub fn summarize<R: Read>(r: R, tol: f64) -> Result<Vec<SummaryRow>> {
    Ok(summarize_rows(&read_rows(r)?, tol))
}

/// CSV rendering of a summary table.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::from("method,rhs_index,mv_to_tol,final_resnorm,mv_total,rd_total,rd_per_mv\n");
    for r in rows {
        let opt = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        let ratio = r.ratio().map_or_else(|| "-".to_string(), |(a, b)| if b == 1 { a.to_string() } else { format!("{a}/{b}") });
        s.push_str(&format!(
            "{},{},{},{:.3e},{},{},{}\n",
            r.method,
            r.rhs_index,
            opt(r.mv_to_tol),
            r.final_resnorm,
            r.mv_total,
            opt(r.rd_total),
            ratio
        ));
    }
    s
}

/// Matrix size, nonzeros and a 1-norm condition estimate of a problem.
pub fn describe_problem(a: &CsrMatrix<f64>) -> Result<String> {
    let lu = BandLu::new(a)?;
    let cond = crate::problems::cond1_estimate(a, &lu);
    Ok(format!("N={} nnz={} cond1~{:.4e}", a.nrows(), a.nnz(), cond))
}

/// Relative true residual of `x`.
pub fn relative_residual<O: LinearOperator<f64> + ?Sized>(a: &O, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.apply_silent(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    norm2(&r) / norm2(b)
}
