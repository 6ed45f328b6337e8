//! Log-barrier interior-point solver for the small convex programs produced by
//! the SCA loops: linear objective, box, linear rows and rotated quadratic
//! cones `s^2 <= u v` with affine `s`, `u`, `v`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub coef: DVector<f64>,
    pub offset: f64,
}

impl Affine {
    pub fn new(coef: DVector<f64>, offset: f64) -> Self {
        Self { coef, offset }
    }

    pub fn constant(dim: usize, offset: f64) -> Self {
        Self {
            coef: DVector::zeros(dim),
            offset,
        }
    }

    pub fn eval(&self, w: &DVector<f64>) -> f64 {
        self.coef.dot(w) + self.offset
    }

    fn extended(&self, extra: f64) -> Self {
        let n = self.coef.len();
        let mut c = self.coef.clone().resize_vertically(n + 1, 0.0);
        c[n] = extra;
        Self::new(c, self.offset)
    }
}

/// `coef . w >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coef: DVector<f64>,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coef: DVector<f64>, rhs: f64) -> Self {
        Self { coef, rhs }
    }

    pub fn slack(&self, w: &DVector<f64>) -> f64 {
        self.coef.dot(w) - self.rhs
    }
}

/// `square(w)^2 <= left(w) * right(w)` with `left, right >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow {
    pub square: Affine,
    pub left: Affine,
    pub right: Affine,
}

impl QuadRow {
    /// `square(w)^2 <= bound(w)`.
    pub fn under_affine(square: Affine, bound: Affine) -> Self {
        let dim = square.coef.len();
        Self {
            square,
            left: bound,
            right: Affine::constant(dim, 1.0),
        }
    }

    /// `left * right - square^2`, or `None` outside the positive branch.
    pub fn margin(&self, w: &DVector<f64>) -> Option<f64> {
        let (u, v) = (self.left.eval(w), self.right.eval(w));
        if u <= 0.0 || v <= 0.0 {
            return None;
        }
        let s = self.square.eval(w);
        Some(u * v - s * s)
    }

    /// Signed violation: positive means infeasible by that amount.
    pub fn violation(&self, w: &DVector<f64>) -> f64 {
        let (u, v, s) = (self.left.eval(w), self.right.eval(w), self.square.eval(w));
        let cone = s * s - u * v;
        cone.max(-u).max(-v)
    }
}

/// Maximize `objective . w` subject to box, linear and quadratic rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSubproblem {
    pub objective: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub linear: Vec<LinearRow>,
    pub quad: Vec<QuadRow>,
}

impl ConvexSubproblem {
    /// Unconstrained problem of the given dimension with infinite box.
    pub fn new(objective: DVector<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            linear: Vec::new(),
            quad: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    /// Largest constraint violation at `w` (0 when feasible).
    pub fn max_violation(&self, w: &DVector<f64>) -> f64 {
        let mut v = 0.0f64;
        for i in 0..self.dim() {
            v = v.max(self.lower[i] - w[i]).max(w[i] - self.upper[i]);
        }
        for r in &self.linear {
            v = v.max(-r.slack(w));
        }
        for q in &self.quad {
            v = v.max(q.violation(w));
        }
        v
    }
}

/// Maximize `objective . w` subject to `A w >= b` and a finite box.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub linear: Vec<LinearRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: DVector<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// `||c + sum_i lambda_i grad g_i||` at the returned point.
    pub kkt_residual: f64,
    /// Multipliers of the box (lower then upper), linear and quadratic rows.
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Barrier merit after each Newton step, grouped by centering stage.
    pub merit_log: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub barrier_growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            barrier_growth: 20.0,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Problem in canonical barrier form: every constraint is `slack > 0`.
struct Barrier {
    c: DVector<f64>,
    lin: Vec<LinearRow>,
    quad: Vec<QuadRow>,
    /// Number of box rows at the start of `lin`.
    box_rows: usize,
    /// `(lower.len(), which bound each box row encodes)` for dual bookkeeping.
    box_map: Vec<(usize, bool)>,
}

impl Barrier {
    fn from_problem(p: &ConvexSubproblem, relax: f64) -> Self {
        let n = p.dim();
        let mut lin = Vec::new();
        let mut box_map = Vec::new();
        for i in 0..n {
            if p.lower[i].is_finite() {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                lin.push(LinearRow::new(e, p.lower[i] - relax));
                box_map.push((i, false));
            }
        }
        for i in 0..n {
            if p.upper[i].is_finite() {
                let mut e = DVector::zeros(n);
                e[i] = -1.0;
                lin.push(LinearRow::new(e, -p.upper[i] - relax));
                box_map.push((i, true));
            }
        }
        let box_rows = lin.len();
        for r in &p.linear {
            lin.push(LinearRow::new(r.coef.clone(), r.rhs - relax));
        }
        let quad = p
            .quad
            .iter()
            .map(|q| {
                let mut q = q.clone();
                // relaxing the product by shifting both factors keeps the row a cone
                q.left.offset += relax;
                q.right.offset += relax;
                q
            })
            .collect();
        Self {
            c: p.objective.clone(),
            lin,
            quad,
            box_rows,
            box_map,
        }
    }

    fn nu(&self) -> f64 {
        (self.lin.len() + 2 * self.quad.len()) as f64
    }

    fn feasible(&self, w: &DVector<f64>) -> bool {
        self.lin.iter().all(|r| r.slack(w) > 0.0)
            && self
                .quad
                .iter()
                .all(|q| q.margin(w).is_some_and(|m| m > 0.0))
    }

    fn phi(&self, w: &DVector<f64>) -> Option<f64> {
        let mut f = 0.0;
        for r in &self.lin {
            let s = r.slack(w);
            if s <= 0.0 {
                return None;
            }
            f -= s.ln();
        }
        for q in &self.quad {
            let m = q.margin(w)?;
            if m <= 0.0 {
                return None;
            }
            f -= m.ln();
        }
        Some(f)
    }

    fn merit(&self, w: &DVector<f64>, t: f64) -> Option<f64> {
        self.phi(w).map(|p| -t * self.c.dot(w) + p)
    }

    fn grad_hess(&self, w: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = w.len();
        let mut g = -&self.c * t;
        let mut h = DMatrix::zeros(n, n);
        for r in &self.lin {
            let s = r.slack(w);
            g -= &r.coef / s;
            h.ger(1.0 / (s * s), &r.coef, &r.coef, 1.0);
        }
        for q in &self.quad {
            let (u, v, s) = (q.left.eval(w), q.right.eval(w), q.square.eval(w));
            let m = u * v - s * s;
            let dm = &q.left.coef * v + &q.right.coef * u - &q.square.coef * (2.0 * s);
            g -= &dm / m;
            h.ger(1.0 / (m * m), &dm, &dm, 1.0);
            h.ger(-1.0 / m, &q.left.coef, &q.right.coef, 1.0);
            h.ger(-1.0 / m, &q.right.coef, &q.left.coef, 1.0);
            h.ger(2.0 / m, &q.square.coef, &q.square.coef, 1.0);
        }
        (g, h)
    }

    fn duals(&self, w: &DVector<f64>, t: f64) -> Vec<f64> {
        let mut d: Vec<f64> = self.lin.iter().map(|r| 1.0 / (t * r.slack(w))).collect();
        d.extend(self.quad.iter().map(|q| {
            let m = q.margin(w).unwrap_or(f64::INFINITY);
            1.0 / (t * m)
        }));
        d
    }
}

fn newton_step(g: &DVector<f64>, h: &DMatrix<f64>) -> DVector<f64> {
    let n = g.len();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-300);
    let mut reg = 0.0;
    loop {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            return -ch.solve(g);
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 10.0 };
    }
}

struct BarrierRun {
    w: DVector<f64>,
    t: f64,
    status: SolveStatus,
    iterations: usize,
    merit_log: Vec<Vec<f64>>,
}

/// Centering stage: damped Newton on `t f + phi` from a strictly feasible point.
fn center(
    b: &Barrier,
    w: &mut DVector<f64>,
    t: f64,
    budget: &mut usize,
    log: &mut Vec<f64>,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> bool {
    let mut f = b.merit(w, t).expect("iterate must stay interior");
    log.push(f);
    loop {
        if *budget == 0 {
            return false;
        }
        let (g, h) = b.grad_hess(w, t);
        let dw = newton_step(&g, &h);
        let dec2 = -g.dot(&dw);
        if !(dec2 > 2e-12) {
            return true;
        }
        *budget -= 1;
        let mut s = 1.0;
        let mut accepted = false;
        while s > 1e-14 {
            let cand = &*w + &dw * s;
            if let Some(fc) = b.merit(&cand, t) {
                if fc <= f - 0.25 * s * dec2 {
                    *w = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            return true;
        }
        log.push(f);
        if stop(w) {
            return true;
        }
    }
}

fn barrier_method(
    b: &Barrier,
    w0: DVector<f64>,
    opts: SolverOptions,
    stop: &dyn Fn(&DVector<f64>) -> bool,
) -> BarrierRun {
    let mut w = w0;
    let nu = b.nu();
    let cn = b.c.norm();
    // least-squares fit of t c to the barrier gradient, floored by the
    // duality-gap guess nu / |c w|
    let t0 = if cn > 0.0 {
        let (g, _) = b.grad_hess(&w, 0.0);
        let proj = -b.c.dot(&g) / (cn * cn);
        let guess = nu / b.c.dot(&w).abs().max(1.0);
        proj.max(1e-3 * guess).min(g.norm() / cn).max(1e-12)
    } else {
        1.0
    };
    let mut t = t0;
    let mut budget = opts.max_iter;
    let mut merit_log = Vec::new();
    loop {
        let mut log = Vec::new();
        let done = center(b, &mut w, t, &mut budget, &mut log, stop);
        merit_log.push(log);
        if stop(&w) {
            return BarrierRun {
                w,
                t,
                status: SolveStatus::Optimal,
                iterations: opts.max_iter - budget,
                merit_log,
            };
        }
        if !done {
            return BarrierRun {
                w,
                t,
                status: SolveStatus::MaxIter,
                iterations: opts.max_iter,
                merit_log,
            };
        }
        let obj = b.c.dot(&w);
        if cn == 0.0 || nu / t <= opts.tol * obj.abs().max(1.0) {
            return BarrierRun {
                w,
                t,
                status: SolveStatus::Optimal,
                iterations: opts.max_iter - budget,
                merit_log,
            };
        }
        t *= opts.barrier_growth;
    }
}

/// Finds a strictly feasible point by minimizing a common shift `s` of every
/// constraint. Returns the point and the final shift.
fn phase_one(p: &ConvexSubproblem, start: &DVector<f64>, opts: SolverOptions) -> (DVector<f64>, f64) {
    let n = p.dim();
    let mut aug = ConvexSubproblem::new({
        let mut c = DVector::zeros(n + 1);
        c[n] = -1.0;
        c
    });
    let mut need: f64 = 0.0;
    for i in 0..n {
        let push = |aug: &mut ConvexSubproblem, sign: f64, bound: f64| {
            let mut e = DVector::zeros(n + 1);
            e[i] = sign;
            e[n] = 1.0;
            aug.linear.push(LinearRow::new(e, sign * bound));
        };
        if p.lower[i].is_finite() {
            push(&mut aug, 1.0, p.lower[i]);
            need = need.max(p.lower[i] - start[i]);
        }
        if p.upper[i].is_finite() {
            push(&mut aug, -1.0, p.upper[i]);
            need = need.max(start[i] - p.upper[i]);
        }
    }
    for r in &p.linear {
        aug.linear.push(LinearRow::new(
            r.coef.clone().resize_vertically(n + 1, 1.0),
            r.rhs,
        ));
        need = need.max(-r.slack(start));
    }
    for q in &p.quad {
        aug.quad.push(QuadRow {
            square: q.square.extended(0.0),
            left: q.left.extended(1.0),
            right: q.right.extended(1.0),
        });
        let s = q.square.eval(start).abs();
        need = need
            .max(s - q.left.eval(start))
            .max(s - q.right.eval(start));
    }
    // keeps the phase-I barrier bounded along free directions of the original rows
    let radius = 1e3 * start.amax().max(1.0);
    for i in 0..n {
        if !p.lower[i].is_finite() {
            aug.lower[i] = start[i] - radius;
        }
        if !p.upper[i].is_finite() {
            aug.upper[i] = start[i] + radius;
        }
    }
    let floor = need.abs().max(1.0);
    let mut e = DVector::zeros(n + 1);
    e[n] = 1.0;
    aug.linear.push(LinearRow::new(e, -floor));
    let mut w0 = start.clone().resize_vertically(n + 1, 0.0);
    w0[n] = need + 1.0;
    let b = Barrier::from_problem(&aug, 0.0);
    debug_assert!(b.feasible(&w0));
    let run = barrier_method(&b, w0, SolverOptions { tol: 1e-12, ..opts }, &|w| w[n] < 0.0);
    let s = run.w[n];
    (run.w.rows(0, n).into_owned(), s)
}

fn report(p: &ConvexSubproblem, b: &Barrier, run: BarrierRun) -> SolveReport {
    let (g, _) = b.grad_hess(&run.w, run.t);
    let kkt = g.norm() / run.t;
    let raw = b.duals(&run.w, run.t);
    // box duals are kept in (lower..., upper...) order over all coordinates
    let n = p.dim();
    let mut duals = vec![0.0; 2 * n];
    for (k, &(i, upper)) in b.box_map.iter().enumerate() {
        duals[if upper { n + i } else { i }] = raw[k];
    }
    duals.extend_from_slice(&raw[b.box_rows..]);
    SolveReport {
        objective: p.objective.dot(&run.w),
        solution: run.w,
        status: run.status,
        kkt_residual: kkt,
        duals,
        iterations: run.iterations,
        merit_log: run.merit_log,
    }
}

fn infeasible(p: &ConvexSubproblem, w: DVector<f64>) -> SolveReport {
    SolveReport {
        objective: p.objective.dot(&w),
        solution: w,
        status: SolveStatus::Infeasible,
        kkt_residual: f64::INFINITY,
        duals: Vec::new(),
        iterations: 0,
        merit_log: Vec::new(),
    }
}

/// Solves `p` from `warm_start`. A warm start on the boundary (or slightly
/// outside it) is pushed into the interior by a phase-I shift first.
pub fn solve_convex(
    p: &ConvexSubproblem,
    warm_start: &DVector<f64>,
    opts: SolverOptions,
) -> SolveReport {
    let strict = Barrier::from_problem(p, 0.0);
    if strict.feasible(warm_start) {
        let run = barrier_method(&strict, warm_start.clone(), opts, &|_| false);
        return report(p, &strict, run);
    }
    let (w, s) = phase_one(p, warm_start, opts);
    if s > 1e-8 {
        return infeasible(p, w);
    }
    let relax = if s < 0.0 { 0.0 } else { s + 1e-12 };
    let b = Barrier::from_problem(p, relax);
    if !b.feasible(&w) {
        return infeasible(p, w);
    }
    let run = barrier_method(&b, w, opts, &|_| false);
    report(p, &b, run)
}

fn lp_as_convex(p: &LinearProgram) -> ConvexSubproblem {
    ConvexSubproblem {
        objective: p.objective.clone(),
        lower: p.lower.clone(),
        upper: p.upper.clone(),
        linear: p.linear.clone(),
        quad: Vec::new(),
    }
}

/// Solves an LP starting from the box center.
pub fn solve_lp(p: &LinearProgram, opts: SolverOptions) -> SolveReport {
    let start = DVector::from_iterator(
        p.lower.len(),
        p.lower.iter().zip(&p.upper).map(|(l, u)| 0.5 * (l + u)),
    );
    solve_lp_from(p, &start, opts)
}

pub fn solve_lp_from(p: &LinearProgram, start: &DVector<f64>, opts: SolverOptions) -> SolveReport {
    solve_convex(&lp_as_convex(p), start, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize, i: usize, v: f64) -> DVector<f64> {
        let mut e = DVector::zeros(n);
        e[i] = v;
        e
    }

    #[test]
    fn trivial_upper_bound() {
        let mut p = ConvexSubproblem::new(unit(1, 0, 1.0));
        p.linear.push(LinearRow::new(unit(1, 0, -1.0), -5.0));
        let r = solve_convex(&p, &DVector::from_element(1, 0.0), SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 5.0).abs() < 1e-5);
        assert!(r.kkt_residual <= 1e-6);
    }

    #[test]
    fn trivial_quadratic() {
        // maximize e s.t. z^2 <= 4 - e, z in [-10, 10]
        let mut p = ConvexSubproblem::new(unit(2, 1, 1.0));
        p.lower[0] = -10.0;
        p.upper[0] = 10.0;
        p.quad.push(QuadRow::under_affine(
            Affine::new(unit(2, 0, 1.0), 0.0),
            Affine::new(unit(2, 1, -1.0), 4.0),
        ));
        let r = solve_convex(&p, &DVector::from_vec(vec![3.0, -6.0]), SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 4.0).abs() < 1e-5, "{}", r.objective);
        assert!(r.solution[0].abs() < 1e-2);
        assert!(p.max_violation(&r.solution) <= 1e-8);
    }

    #[test]
    fn boundary_warm_start_is_accepted() {
        let mut p = ConvexSubproblem::new(unit(2, 1, 1.0));
        p.quad.push(QuadRow::under_affine(
            Affine::new(unit(2, 0, 1.0), 0.0),
            Affine::new(unit(2, 1, -1.0), 4.0),
        ));
        // on the boundary z^2 = 4 - e
        let r = solve_convex(&p, &DVector::from_vec(vec![1.0, 3.0]), SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.objective >= 3.0 && (r.objective - 4.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_detected() {
        let mut p = ConvexSubproblem::new(unit(1, 0, 1.0));
        p.lower[0] = 0.0;
        p.upper[0] = 1.0;
        p.linear.push(LinearRow::new(unit(1, 0, 1.0), 2.0));
        let r = solve_convex(&p, &DVector::from_element(1, 0.5), SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn rotated_cone_product() {
        // maximize e s.t. 1 <= (1 + z)(1 - e + z)... with z <= 1: optimum e = 1.5 at z = 1
        let mut p = ConvexSubproblem::new(unit(2, 1, 1.0));
        p.lower[0] = -0.5;
        p.upper[0] = 1.0;
        p.quad.push(QuadRow {
            square: Affine::constant(2, 1.0),
            left: Affine::new(unit(2, 0, 1.0), 1.0),
            right: Affine::new(DVector::from_vec(vec![1.0, -1.0]), 1.0),
        });
        let r = solve_convex(&p, &DVector::from_vec(vec![0.5, 0.0]), SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.5).abs() < 1e-5);
    }

    #[test]
    fn lp_trivial() {
        let lp = LinearProgram {
            objective: unit(1, 0, 1.0),
            lower: vec![0.0],
            upper: vec![1.0],
            linear: vec![],
        };
        let r = solve_lp(&lp, SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-5);

        let zero = LinearProgram {
            objective: DVector::zeros(2),
            ..LinearProgram {
                objective: DVector::zeros(2),
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 2.0],
                linear: vec![LinearRow::new(DVector::from_vec(vec![1.0, 1.0]), 0.0)],
            }
        };
        let r = solve_lp(&zero, SolverOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, 0.0);
        assert!(zero.linear[0].slack(&r.solution) >= 0.0);
    }

    /// Enumerates pairwise intersections of all rows (box included).
    fn lp_vertex_oracle(lp: &LinearProgram) -> f64 {
        let mut rows: Vec<(f64, f64, f64)> = lp
            .linear
            .iter()
            .map(|r| (r.coef[0], r.coef[1], r.rhs))
            .collect();
        rows.push((1.0, 0.0, lp.lower[0]));
        rows.push((-1.0, 0.0, -lp.upper[0]));
        rows.push((0.0, 1.0, lp.lower[1]));
        rows.push((0.0, -1.0, -lp.upper[1]));
        let mut best = f64::NEG_INFINITY;
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                let (a, b, e) = rows[i];
                let (c, d, f) = rows[j];
                let det = a * d - b * c;
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (e * d - b * f) / det;
                let y = (a * f - e * c) / det;
                if rows.iter().all(|&(p, q, r)| p * x + q * y >= r - 1e-9) {
                    best = best.max(lp.objective[0] * x + lp.objective[1] * y);
                }
            }
        }
        best
    }

    #[test]
    fn lp_matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let rows = (0..5)
                .map(|_| {
                    let a = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
                    // every row holds at the origin with margin
                    LinearRow::new(a, -rng.random_range(0.1..1.0))
                })
                .collect();
            let lp = LinearProgram {
                objective: DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]),
                lower: vec![-2.0, -2.0],
                upper: vec![2.0, 2.0],
                linear: rows,
            };
            let r = solve_lp(&lp, SolverOptions::default());
            assert_eq!(r.status, SolveStatus::Optimal);
            let oracle = lp_vertex_oracle(&lp);
            assert!((r.objective - oracle).abs() <= 1e-5 * oracle.abs().max(1.0), "{} vs {oracle}", r.objective);
        }
    }

    /// Random instance over (z1, z2, e): maximize e under quadratic and
    /// linear rows, each with a negative `e` coefficient.
    fn random_instance(rng: &mut ChaCha8Rng) -> ConvexSubproblem {
        let mut p = ConvexSubproblem::new(unit(3, 2, 1.0));
        for i in 0..2 {
            p.lower[i] = -1.0;
            p.upper[i] = 1.0;
        }
        for _ in 0..3 {
            let g = DVector::from_vec(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0]);
            let h = DVector::from_vec(vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                -rng.random_range(0.5..2.0),
            ]);
            p.quad.push(QuadRow::under_affine(
                Affine::new(g, rng.random_range(-1.0..1.0)),
                Affine::new(h, rng.random_range(1.0..3.0)),
            ));
        }
        let a = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), -1.0]);
        p.linear.push(LinearRow::new(a, -rng.random_range(0.5..2.0)));
        p
    }

    fn grid_oracle(p: &ConvexSubproblem) -> f64 {
        let steps = 800;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let z1 = -1.0 + 2.0 * i as f64 / steps as f64;
                let z2 = -1.0 + 2.0 * j as f64 / steps as f64;
                let mut e = f64::INFINITY;
                for q in &p.quad {
                    let s = q.square.coef[0] * z1 + q.square.coef[1] * z2 + q.square.offset;
                    let h = &q.left.coef;
                    e = e.min((h[0] * z1 + h[1] * z2 + q.left.offset - s * s) / -h[2]);
                }
                for r in &p.linear {
                    let a = &r.coef;
                    e = e.min((a[0] * z1 + a[1] * z2 - r.rhs) / -a[2]);
                }
                best = best.max(e);
            }
        }
        best
    }

    #[test]
    fn convex_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..8 {
            let p = random_instance(&mut rng);
            let r = solve_convex(&p, &DVector::from_vec(vec![0.0, 0.0, -100.0]), SolverOptions::default());
            assert_eq!(r.status, SolveStatus::Optimal);
            let oracle = grid_oracle(&p);
            assert!(r.objective >= oracle - 1e-6);
            assert!((r.objective - oracle).abs() <= 1e-3, "{} vs {oracle}", r.objective);
            assert!(p.max_violation(&r.solution) <= 1e-8);
            assert!(r.kkt_residual <= 1e-6);
            assert!(r.duals.iter().all(|&d| d >= 0.0));
        }
    }

    #[test]
    fn deterministic_and_monotone_merit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_instance(&mut rng);
        let w0 = DVector::from_vec(vec![0.1, -0.2, -50.0]);
        let a = solve_convex(&p, &w0, SolverOptions::default());
        let b = solve_convex(&p, &w0, SolverOptions::default());
        assert_eq!(a, b);
        for stage in &a.merit_log {
            for w in stage.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn never_worse_than_warm_start(seed in 0u64..10_000, z1 in -1.0f64..1.0, z2 in -1.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_instance(&mut rng);
            let w0 = DVector::from_vec(vec![z1, z2, -1e3]);
            prop_assume!(p.max_violation(&w0) <= 0.0);
            let r = solve_convex(&p, &w0, SolverOptions::default());
            prop_assert_eq!(r.status, SolveStatus::Optimal);
            prop_assert!(r.objective >= w0[2]);
            prop_assert!(p.max_violation(&r.solution) <= 1e-8);
        }
    }
}
