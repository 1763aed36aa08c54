use crate::linalg::{norm2, LinearOperator};
use crate::scalar::{RealScalar, Scalar};


/// Row annotation in convergence histories.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    None,
    Capture,
    BlockBoundary,
}

impl Marker {
    pub fn as_str(self) -> &'static str {
        match self {
            Marker::None => "none",
            Marker::Capture => "capture",
            Marker::BlockBoundary => "block_boundary",
        }
    }
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Marker::None),
            "capture" => Some(Marker::Capture),
            "block_boundary" => Some(Marker::BlockBoundary),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport<T: Scalar> {
    /// Method label including its parameters, e.g. `sridr(s=20;jstar=4)`.
    pub method: String,
    pub x: Vec<T>,
    /// `(mv_count, ‖b − A·x‖)` starting with `(0, ‖b‖)`; mv counts nondecreasing.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
    pub mv_total: usize,
    pub rd_total: usize,
    /// Products actually performed when they differ from the nominal `mv_total`.
    pub mv_physical: usize,
    pub precond_solves: usize,
    /// Level-raising cycles (IDR family) or iterations.
    pub cycles: usize,
    pub bnorm: f64,
    pub markers: Vec<(usize, Marker)>,
    /// Orthogonality defect of the residual against the recycled test space, when measured.
    pub defect: Option<f64>,
    pub notes: Vec<String>,
}

impl<T: Scalar> SolveReport<T> {
    pub fn final_resnorm(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.1)
    }

    pub fn marker_at(&self, mv: usize) -> Marker {
        self.markers.iter().rev().find(|m| m.0 == mv).map_or(Marker::None, |m| m.1)
    }

    /// Relative true residual at the end of the run.
    pub fn relative_resnorm(&self) -> f64 {
        if self.bnorm == 0.0 {
            0.0
        } else {
            self.final_resnorm() / self.bnorm
        }
    }

    /// First mv count at which the relative true residual reaches `tol`.
    pub fn mv_to_tol(&self, tol: f64) -> Option<usize> {
        self.history.iter().find(|h| h.1 <= tol * self.bnorm).map(|h| h.0)
    }
}

/// Tracks true residuals `‖b − A·x‖` against the operator's mv counter.
///
/// With `per_mv` every product is sampled; otherwise only explicit cycle ends.
pub struct Recorder<'a, T: Scalar, O: LinearOperator<T> + ?Sized> {
    op: &'a O,
    b: &'a [T],
    base: usize,
    per_mv: bool,
    b0: f64,
    hist: Vec<(usize, f64)>,
    markers: Vec<(usize, Marker)>,
}

impl<'a, T: Scalar, O: LinearOperator<T> + ?Sized> Recorder<'a, T, O> {
    /// Starts at `x = 0`; samples per mv when `N ≤ 1000`.
    pub fn new(op: &'a O, b: &'a [T]) -> Self {
        let per_mv = b.len() <= 1000;
        Self::with_sampling(op, b, per_mv)
    }

    pub fn with_sampling(op: &'a O, b: &'a [T], per_mv: bool) -> Self {
        let b0 = norm2(b).to_f64();
        Recorder { op, b, base: op.mv_count(), per_mv, b0, hist: vec![(0, b0)], markers: Vec::new() }
    }

    pub fn mv(&self) -> usize {
        self.op.mv_count() - self.base
    }

    pub fn true_resnorm(&self, x: &[T]) -> T::Real {
        let ax = self.op.apply_silent(x);
        let r: Vec<T> = self.b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
        norm2(&r)
    }

    /// Records unconditionally; an entry at the same mv count is overwritten,
    /// except the initial `‖b‖`.
    pub fn record(&mut self, x: &[T]) -> f64 {
        let m = self.mv();
        let res = self.true_resnorm(x).to_f64();
        let keep_first = self.hist.len() == 1;
        match self.hist.last_mut() {
            Some(last) if last.0 == m && !keep_first => last.1 = res,
            _ => self.hist.push((m, res)),
        }
        res
    }

    /// Per-product sampling point.
    pub fn step(&mut self, x: &[T]) {
        if self.per_mv {
            self.record(x);
        }
    }

    pub fn markers_push(&mut self, mv: usize, marker: Marker) {
        self.markers.push((mv, marker));
    }

    pub fn mark(&mut self, marker: Marker) {
        let m = self.mv();
        self.markers.push((m, marker));
    }

    pub fn last_resnorm(&self) -> f64 {
        self.hist.last().map_or(f64::NAN, |h| h.1)
    }

    pub fn bnorm(&self) -> f64 {
        self.b0
    }

    pub fn finish(mut self, method: String, x: Vec<T>, tol: f64, rd_total: usize) -> SolveReport<T> {
        let res = self.record(&x);
        let mv = self.mv();
        SolveReport {
            method,
            converged: res <= tol * self.bnorm(),
            x,
            history: self.hist,
            mv_total: mv,
            rd_total,
            mv_physical: mv,
            precond_solves: 0,
            cycles: 0,
            bnorm: self.b0,
            markers: self.markers,
            defect: None,
            notes: Vec::new(),
        }
    }
}
