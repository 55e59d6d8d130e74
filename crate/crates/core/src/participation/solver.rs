//! Bilinear finite elements on the tensor mesh, solved by conjugate
//! gradients preconditioned with a geometric multigrid V-cycle.
//!
//! Levels are nested by bisection and media are constant on coarsest
//! cells, so rediscretizing on a coarse mesh gives the Galerkin operator.
//! The smoother is symmetric alternating line Gauss-Seidel, which copes
//! with the extreme cell aspect ratios near thin layers. The coarsest
//! level is factored once with a banded Cholesky.

use super::mesh::{Boundary, Domain, Medium, Mesh};
use super::ParticipationError;

/// Nine-point symmetric stencil, stored as the center and the four
/// couplings pointing east, north, north-east and north-west.
#[derive(Debug, Clone)]
struct Operator {
    w: usize,
    h: usize,
    c: Vec<f64>,
    e: Vec<f64>,
    n: Vec<f64>,
    ne: Vec<f64>,
    nw: Vec<f64>,
    fixed: Vec<bool>,
}

fn eps_of(m: Medium) -> Option<f64> {
    match m {
        Medium::Dielectric { eps_r, .. } => Some(eps_r),
        Medium::Conductor(_) => None,
    }
}

/// Element integrals of a unit-permittivity bilinear cell: diagonal,
/// horizontal edge, vertical edge and diagonal couplings.
fn element(hx: f64, hy: f64) -> (f64, f64, f64, f64) {
    let a = hy / hx;
    let b = hx / hy;
    (
        (a + b) / 3.0,
        -a / 3.0 + b / 6.0,
        a / 6.0 - b / 3.0,
        -(a + b) / 6.0,
    )
}

/// Dirichlet values of every node (`None` for free nodes).
pub(crate) fn dirichlet(
    mesh: &Mesh,
    domain: &Domain,
) -> Result<Vec<Option<f64>>, ParticipationError> {
    let (w, h) = (mesh.x.len(), mesh.y.len());
    let mut out = vec![None; w * h];
    for j in 0..h {
        for i in 0..w {
            let on_side = [i == 0, i == w - 1, j == 0, j == h - 1];
            for (k, &s) in on_side.iter().enumerate() {
                if s && domain.sides[k] == Boundary::Grounded {
                    out[j * w + i] = Some(0.0);
                }
            }
        }
    }
    for j in 0..mesh.ny() {
        for i in 0..mesh.nx() {
            if let Medium::Conductor(k) = mesh.cell(i, j) {
                let v = *domain.potentials.get(k).ok_or_else(|| {
                    ParticipationError::InvalidModel(format!("conductor {k} has no potential"))
                })?;
                for n in [
                    j * w + i,
                    j * w + i + 1,
                    (j + 1) * w + i,
                    (j + 1) * w + i + 1,
                ] {
                    match out[n] {
                        Some(old) if old != v && !is_side(n, w, h) => {
                            return Err(ParticipationError::InvalidModel(format!(
                                "conductors at {old} V and {v} V touch"
                            )))
                        }
                        _ => out[n] = Some(v),
                    }
                }
            }
        }
    }
    Ok(out)
}

fn is_side(n: usize, w: usize, h: usize) -> bool {
    let (i, j) = (n % w, n / w);
    i == 0 || j == 0 || i == w - 1 || j == h - 1
}

impl Operator {
    fn assemble(mesh: &Mesh, fixed: Vec<bool>) -> Self {
        let (w, h) = (mesh.x.len(), mesh.y.len());
        let mut op = Operator {
            w,
            h,
            c: vec![0.0; w * h],
            e: vec![0.0; w * h],
            n: vec![0.0; w * h],
            ne: vec![0.0; w * h],
            nw: vec![0.0; w * h],
            fixed,
        };
        for j in 0..mesh.ny() {
            for i in 0..mesh.nx() {
                let Some(eps) = eps_of(mesh.cell(i, j)) else {
                    continue;
                };
                let (d, kh, kv, kd) = element(mesh.x[i + 1] - mesh.x[i], mesh.y[j + 1] - mesh.y[j]);
                let p00 = j * w + i;
                let (p10, p01, p11) = (p00 + 1, p00 + w, p00 + w + 1);
                for p in [p00, p10, p01, p11] {
                    op.c[p] += eps * d;
                }
                op.e[p00] += eps * kh;
                op.e[p01] += eps * kh;
                op.n[p00] += eps * kv;
                op.n[p10] += eps * kv;
                op.ne[p00] += eps * kd;
                op.nw[p10] += eps * kd;
            }
        }
        op
    }

    /// Full-node product, ignoring Dirichlet masking.
    fn apply_raw(&self, x: &[f64], y: &mut [f64]) {
        let w = self.w;
        for j in 0..self.h {
            for i in 0..w {
                let k = j * w + i;
                let mut s = self.c[k] * x[k];
                if i + 1 < w {
                    s += self.e[k] * x[k + 1];
                }
                if i > 0 {
                    s += self.e[k - 1] * x[k - 1];
                }
                if j + 1 < self.h {
                    s += self.n[k] * x[k + w];
                    if i + 1 < w {
                        s += self.ne[k] * x[k + w + 1];
                    }
                    if i > 0 {
                        s += self.nw[k] * x[k + w - 1];
                    }
                }
                if j > 0 {
                    s += self.n[k - w] * x[k - w];
                    if i > 0 {
                        s += self.ne[k - w - 1] * x[k - w - 1];
                    }
                    if i + 1 < w {
                        s += self.nw[k - w + 1] * x[k - w + 1];
                    }
                }
                y[k] = s;
            }
        }
    }

    /// Product on the free subspace: fixed entries are treated as zero.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_raw(x, y);
        for (k, &f) in self.fixed.iter().enumerate() {
            if f {
                y[k] = 0.0;
            }
        }
    }

    /// Couplings of node `k` to nodes outside its own row (or column).
    fn off_line(&self, x: &[f64], i: usize, j: usize, rows: bool) -> f64 {
        let (w, k) = (self.w, j * self.w + i);
        let mut s = 0.0;
        if j + 1 < self.h {
            if rows {
                s += self.n[k] * x[k + w];
            }
            if i + 1 < w {
                s += self.ne[k] * x[k + w + 1];
            }
            if i > 0 {
                s += self.nw[k] * x[k + w - 1];
            }
        }
        if j > 0 {
            if rows {
                s += self.n[k - w] * x[k - w];
            }
            if i > 0 {
                s += self.ne[k - w - 1] * x[k - w - 1];
            }
            if i + 1 < w {
                s += self.nw[k - w + 1] * x[k - w + 1];
            }
        }
        if !rows {
            if i + 1 < w {
                s += self.e[k] * x[k + 1];
            }
            if i > 0 {
                s += self.e[k - 1] * x[k - 1];
            }
        }
        s
    }

    /// One Gauss-Seidel pass over lines; `rows` picks x-lines, `forward`
    /// the sweep order.
    fn line_sweep(&self, x: &mut [f64], b: &[f64], rows: bool, forward: bool, work: &mut LineWork) {
        let (lines, len) = if rows {
            (self.h, self.w)
        } else {
            (self.w, self.h)
        };
        let node = |line: usize, m: usize| {
            if rows {
                line * self.w + m
            } else {
                m * self.w + line
            }
        };
        for step in 0..lines {
            let line = if forward { step } else { lines - 1 - step };
            let LineWork { lo, di, up, rhs } = work;
            for m in 0..len {
                let k = node(line, m);
                if self.fixed[k] {
                    lo[m] = 0.0;
                    di[m] = 1.0;
                    up[m] = 0.0;
                    rhs[m] = 0.0;
                    continue;
                }
                let (i, j) = (k % self.w, k / self.w);
                di[m] = self.c[k];
                if rows {
                    lo[m] = if i > 0 { self.e[k - 1] } else { 0.0 };
                    up[m] = if i + 1 < self.w { self.e[k] } else { 0.0 };
                } else {
                    lo[m] = if j > 0 { self.n[k - self.w] } else { 0.0 };
                    up[m] = if j + 1 < self.h { self.n[k] } else { 0.0 };
                }
                rhs[m] = b[k] - self.off_line(x, i, j, rows);
            }
            // couplings into fixed nodes vanish because those unknowns are zero
            for m in 0..len {
                if m > 0 && self.fixed[node(line, m - 1)] {
                    lo[m] = 0.0;
                }
                if m + 1 < len && self.fixed[node(line, m + 1)] {
                    up[m] = 0.0;
                }
            }
            thomas(&lo[..len], &mut di[..len], &up[..len], &mut rhs[..len]);
            for m in 0..len {
                x[node(line, m)] = rhs[m];
            }
        }
    }
}

struct LineWork {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
    rhs: Vec<f64>,
}

impl LineWork {
    fn new(n: usize) -> Self {
        Self {
            lo: vec![0.0; n],
            di: vec![0.0; n],
            up: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }
}

/// Solves a tridiagonal system in place; the solution replaces `rhs`.
fn thomas(lo: &[f64], di: &mut [f64], up: &[f64], rhs: &mut [f64]) {
    let n = rhs.len();
    for m in 1..n {
        let f = lo[m] / di[m - 1];
        di[m] -= f * up[m - 1];
        rhs[m] -= f * rhs[m - 1];
    }
    rhs[n - 1] /= di[n - 1];
    for m in (0..n - 1).rev() {
        rhs[m] = (rhs[m] - up[m] * rhs[m + 1]) / di[m];
    }
}

/// Banded Cholesky factor of the coarsest operator on the free nodes.
struct BandCholesky {
    n: usize,
    p: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor(op: &Operator) -> Result<Self, ParticipationError> {
        let n = op.w * op.h;
        let p = op.w + 1;
        let mut a = vec![0.0; n * (p + 1)];
        let idx = |i: usize, d: usize| i * (p + 1) + d;
        for k in 0..n {
            if op.fixed[k] {
                a[idx(k, 0)] = 1.0;
                continue;
            }
            a[idx(k, 0)] = op.c[k];
            let (i, j) = (k % op.w, k / op.w);
            let mut set = |other: usize, v: f64| {
                if !op.fixed[other] {
                    a[idx(k, k - other)] = v;
                }
            };
            if i > 0 {
                set(k - 1, op.e[k - 1]);
            }
            if j > 0 {
                set(k - op.w, op.n[k - op.w]);
                if i > 0 {
                    set(k - op.w - 1, op.ne[k - op.w - 1]);
                }
                if i + 1 < op.w {
                    set(k - op.w + 1, op.nw[k - op.w + 1]);
                }
            }
        }
        for i in 0..n {
            for d in (0..=p.min(i)).rev() {
                let k = i - d;
                let mut s = a[idx(i, d)];
                // sum over m < k within both bands
                let lo = i.saturating_sub(p);
                for m in lo..k {
                    s -= a[idx(i, i - m)] * a[idx(k, k - m)];
                }
                if d == 0 {
                    if !(s > 0.0) {
                        return Err(ParticipationError::Solver {
                            reason: "coarse operator is not positive definite".into(),
                            residuals: vec![],
                        });
                    }
                    a[idx(i, 0)] = s.sqrt();
                } else {
                    a[idx(i, d)] = s / a[idx(k, 0)];
                }
            }
        }
        Ok(Self { n, p, l: a })
    }

    fn solve(&self, b: &mut [f64]) {
        let idx = |i: usize, d: usize| i * (self.p + 1) + d;
        for i in 0..self.n {
            let mut s = b[i];
            for m in i.saturating_sub(self.p)..i {
                s -= self.l[idx(i, i - m)] * b[m];
            }
            b[i] = s / self.l[idx(i, 0)];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for m in i + 1..(i + self.p + 1).min(self.n) {
                s -= self.l[idx(m, m - i)] * b[m];
            }
            b[i] = s / self.l[idx(i, 0)];
        }
    }
}

/// Interpolation weights from a level to the next finer one along one axis.
fn axis_weights(fine_len: usize) -> Vec<[(usize, f64); 2]> {
    (0..fine_len)
        .map(|m| {
            if m % 2 == 0 {
                [(m / 2, 1.0), (m / 2, 0.0)]
            } else {
                [(m / 2, 0.5), (m / 2 + 1, 0.5)]
            }
        })
        .collect()
}

struct Hierarchy {
    ops: Vec<Operator>,
    coarse: BandCholesky,
}

impl Hierarchy {
    fn prolong(&self, l: usize, xc: &[f64], xf: &mut [f64]) {
        let (fine, coarse) = (&self.ops[l], &self.ops[l - 1]);
        let wx = axis_weights(fine.w);
        let wy = axis_weights(fine.h);
        for j in 0..fine.h {
            for i in 0..fine.w {
                let k = j * fine.w + i;
                if fine.fixed[k] {
                    xf[k] = 0.0;
                    continue;
                }
                let mut s = 0.0;
                for &(cy, ay) in &wy[j] {
                    for &(cx, ax) in &wx[i] {
                        if ax * ay != 0.0 {
                            s += ax * ay * xc[cy * coarse.w + cx];
                        }
                    }
                }
                xf[k] = s;
            }
        }
    }

    fn restrict(&self, l: usize, rf: &[f64], rc: &mut [f64]) {
        let (fine, coarse) = (&self.ops[l], &self.ops[l - 1]);
        let wx = axis_weights(fine.w);
        let wy = axis_weights(fine.h);
        rc.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..fine.h {
            for i in 0..fine.w {
                let r = rf[j * fine.w + i];
                if r == 0.0 {
                    continue;
                }
                for &(cy, ay) in &wy[j] {
                    for &(cx, ax) in &wx[i] {
                        if ax * ay != 0.0 {
                            rc[cy * coarse.w + cx] += ax * ay * r;
                        }
                    }
                }
            }
        }
        for (k, &f) in coarse.fixed.iter().enumerate() {
            if f {
                rc[k] = 0.0;
            }
        }
    }

    fn vcycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l == 0 {
            x.copy_from_slice(b);
            self.coarse.solve(x);
            return;
        }
        let op = &self.ops[l];
        let mut work = LineWork::new(op.w.max(op.h));
        x.iter_mut().for_each(|v| *v = 0.0);
        op.line_sweep(x, b, true, true, &mut work);
        op.line_sweep(x, b, false, true, &mut work);
        let mut r = vec![0.0; x.len()];
        op.apply(x, &mut r);
        for k in 0..r.len() {
            r[k] = if op.fixed[k] { 0.0 } else { b[k] - r[k] };
        }
        let cn = self.ops[l - 1].w * self.ops[l - 1].h;
        let mut rc = vec![0.0; cn];
        let mut ec = vec![0.0; cn];
        self.restrict(l, &r, &mut rc);
        self.vcycle(l - 1, &rc, &mut ec);
        let mut ef = vec![0.0; x.len()];
        self.prolong(l, &ec, &mut ef);
        for k in 0..x.len() {
            x[k] += ef[k];
        }
        op.line_sweep(x, b, false, false, &mut work);
        op.line_sweep(x, b, true, false, &mut work);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // fixed-order pairwise sum keeps results reproducible
    fn rec(a: &[f64], b: &[f64]) -> f64 {
        if a.len() <= 256 {
            return a.iter().zip(b).map(|(x, y)| x * y).sum();
        }
        let m = a.len() / 2;
        rec(&a[..m], &b[..m]) + rec(&a[m..], &b[m..])
    }
    rec(a, b)
}

/// Converged potential on a mesh.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub mesh: Mesh,
    /// Node potentials, V, row-major.
    pub phi: Vec<f64>,
    /// CG iterations on the finest level.
    pub iterations: usize,
    /// Relative residual after each iteration on the finest level.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

/// Solves for the potential on `meshes.last()`, using the whole ladder of
/// nested meshes (coarsest first) for multigrid and nested iteration.
pub fn solve(
    domain: &Domain,
    meshes: Vec<Mesh>,
    opts: &SolverOptions,
) -> Result<FieldSolution, ParticipationError> {
    Ok(solve_ladder(domain, meshes, opts)?
        .pop()
        .expect("at least one level"))
}

/// Like [`solve`] but returns the converged solution of every level.
pub fn solve_ladder(
    domain: &Domain,
    meshes: Vec<Mesh>,
    opts: &SolverOptions,
) -> Result<Vec<FieldSolution>, ParticipationError> {
    if meshes.is_empty() {
        return Err(ParticipationError::InvalidModel(
            "no mesh to solve on".into(),
        ));
    }
    let mut ops = Vec::with_capacity(meshes.len());
    let mut values = Vec::with_capacity(meshes.len());
    for m in &meshes {
        let d = dirichlet(m, domain)?;
        ops.push(Operator::assemble(
            m,
            d.iter().map(Option::is_some).collect(),
        ));
        values.push(d);
    }
    if values[0].iter().all(Option::is_none) {
        return Err(ParticipationError::InvalidModel(
            "no conductor or grounded side fixes the potential".into(),
        ));
    }
    let coarse = BandCholesky::factor(&ops[0])?;
    let hier = Hierarchy { ops, coarse };

    let lift = |l: usize| -> Vec<f64> { values[l].iter().map(|v| v.unwrap_or(0.0)).collect() };
    let rhs = |l: usize, g: &[f64]| -> Vec<f64> {
        let op = &hier.ops[l];
        let mut ag = vec![0.0; g.len()];
        op.apply_raw(g, &mut ag);
        ag.iter()
            .zip(&op.fixed)
            .map(|(&v, &f)| if f { 0.0 } else { -v })
            .collect()
    };

    // coarsest level exactly
    let g0 = lift(0);
    let mut v = rhs(0, &g0);
    hier.coarse.solve(&mut v);
    let mut phi: Vec<f64> = v.iter().zip(&g0).map(|(a, b)| a + b).collect();
    let mut sols = vec![FieldSolution {
        mesh: meshes[0].clone(),
        phi: phi.clone(),
        iterations: 0,
        residuals: vec![],
        converged: true,
    }];

    for l in 1..hier.ops.len() {
        let op = &hier.ops[l];
        let g = lift(l);
        let b = rhs(l, &g);
        // nested iteration: interpolate the coarser full potential
        let mut x = vec![0.0; g.len()];
        {
            let mut tmp = vec![0.0; g.len()];
            let wx = axis_weights(op.w);
            let wy = axis_weights(op.h);
            let cw = hier.ops[l - 1].w;
            for j in 0..op.h {
                for i in 0..op.w {
                    let mut s = 0.0;
                    for &(cy, ay) in &wy[j] {
                        for &(cx, ax) in &wx[i] {
                            if ax * ay != 0.0 {
                                s += ax * ay * phi[cy * cw + cx];
                            }
                        }
                    }
                    tmp[j * op.w + i] = s;
                }
            }
            for k in 0..x.len() {
                x[k] = if op.fixed[k] { 0.0 } else { tmp[k] - g[k] };
            }
        }
        let bnorm = dot(&b, &b).sqrt();
        let mut r = vec![0.0; x.len()];
        op.apply(&x, &mut r);
        for k in 0..r.len() {
            r[k] = b[k] - r[k];
        }
        let mut z = vec![0.0; x.len()];
        hier.vcycle(l, &r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; x.len()];
        let mut residuals = Vec::new();
        let mut ok = bnorm == 0.0;
        let mut it = 0;
        while !ok && it < opts.max_iterations {
            op.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            it += 1;
            let rel = dot(&r, &r).sqrt() / bnorm;
            residuals.push(rel);
            if rel < opts.tolerance {
                ok = true;
                break;
            }
            hier.vcycle(l, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..x.len() {
                p[k] = z[k] + beta * p[k];
            }
        }
        if !ok {
            return Err(ParticipationError::Solver {
                reason: format!("no convergence on level {l} after {it} iterations"),
                residuals,
            });
        }
        phi = x.iter().zip(&g).map(|(a, b)| a + b).collect();
        sols.push(FieldSolution {
            mesh: meshes[l].clone(),
            phi: phi.clone(),
            iterations: it,
            residuals,
            converged: ok,
        });
    }
    Ok(sols)
}

impl FieldSolution {
    fn corners(&self, i: usize, j: usize) -> [f64; 4] {
        let w = self.mesh.x.len();
        let k = j * w + i;
        [
            self.phi[k],
            self.phi[k + 1],
            self.phi[k + w],
            self.phi[k + w + 1],
        ]
    }

    /// Potential gradient (V/µm) in cell (i, j) at local coordinates (ξ, η) ∈ [0, 1]².
    pub fn gradient(&self, i: usize, j: usize, xi: f64, eta: f64) -> (f64, f64) {
        let [p00, p10, p01, p11] = self.corners(i, j);
        let hx = self.mesh.x[i + 1] - self.mesh.x[i];
        let hy = self.mesh.y[j + 1] - self.mesh.y[j];
        (
            ((p10 - p00) * (1.0 - eta) + (p11 - p01) * eta) / hx,
            ((p01 - p00) * (1.0 - xi) + (p11 - p10) * xi) / hy,
        )
    }

    /// ∫ |∇φ|² over cell (i, j), exact for the bilinear field (V²).
    pub fn cell_grad_sq(&self, i: usize, j: usize) -> f64 {
        let [p00, p10, p01, p11] = self.corners(i, j);
        let hx = self.mesh.x[i + 1] - self.mesh.x[i];
        let hy = self.mesh.y[j + 1] - self.mesh.y[j];
        let (a, b) = ((p10 - p00) / hx, (p11 - p01) / hx);
        let (c, d) = ((p01 - p00) / hy, (p11 - p10) / hy);
        hx * hy * ((a * a + a * b + b * b) + (c * c + c * d + d * d)) / 3.0
    }

    /// ∫ ε_r |∇φ|² over all dielectric cells (V², dimensionless permittivity).
    pub fn weighted_energy(&self) -> f64 {
        let mut parts = Vec::with_capacity(self.mesh.ny());
        for j in 0..self.mesh.ny() {
            let mut s = 0.0;
            for i in 0..self.mesh.nx() {
                if let Some(eps) = eps_of(self.mesh.cell(i, j)) {
                    s += eps * self.cell_grad_sq(i, j);
                }
            }
            parts.push(s);
        }
        parts.iter().sum()
    }

    /// Electrostatic energy per unit length, J/m.
    pub fn total_energy(&self) -> f64 {
        0.5 * crate::cpw_analytics::EPS0 * self.weighted_energy()
    }

    /// Node-averaged field magnitude, V/m.
    pub fn node_field(&self) -> Vec<f64> {
        let (w, h) = (self.mesh.x.len(), self.mesh.y.len());
        let mut sum = vec![0.0; w * h];
        let mut cnt = vec![0u32; w * h];
        for j in 0..self.mesh.ny() {
            for i in 0..self.mesh.nx() {
                if eps_of(self.mesh.cell(i, j)).is_none() {
                    continue;
                }
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let (gx, gy) = self.gradient(i, j, di as f64, dj as f64);
                    let k = (j + dj) * w + i + di;
                    sum[k] += (gx * gx + gy * gy).sqrt() * 1e6;
                    cnt[k] += 1;
                }
            }
        }
        sum.iter()
            .zip(&cnt)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::participation::mesh::{build_mesh, Bulk, Rect};

    fn plate_domain() -> Domain {
        let diel = Medium::Dielectric {
            eps_r: 3.0,
            bulk: Bulk::Other,
        };
        Domain {
            bounds: Rect::new(0.0, 0.0, 10.0, 4.0),
            background: diel,
            rects: vec![
                (Rect::new(0.0, 0.0, 10.0, 0.5), Medium::Conductor(0)),
                (Rect::new(0.0, 3.5, 10.0, 4.0), Medium::Conductor(1)),
            ],
            potentials: vec![0.0, 1.0],
            sides: [
                Boundary::Open,
                Boundary::Open,
                Boundary::Open,
                Boundary::Open,
            ],
            h_min: 0.2,
            h_max: 1.0,
            growth: 1.5,
            mirror_x: None,
            x_keys: vec![],
            y_keys: vec![],
        }
    }

    #[test]
    fn thomas_solves() {
        let lo = [0.0, 1.0, 1.0];
        let mut di = [4.0, 4.0, 4.0];
        let up = [1.0, 1.0, 0.0];
        let mut r = [5.0, 6.0, 5.0];
        thomas(&lo, &mut di, &up, &mut r);
        for v in r {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn parallel_plate_is_linear() {
        let d = plate_domain();
        let meshes: Vec<Mesh> = (0..=2)
            .map(|l| build_mesh(&d, l, 1 << 22).unwrap())
            .collect();
        let sol = solve(&d, meshes, &SolverOptions::default()).unwrap();
        let w = sol.mesh.x.len();
        for (k, &p) in sol.phi.iter().enumerate() {
            let y = sol.mesh.y[k / w];
            let exact = ((y - 0.5) / 3.0).clamp(0.0, 1.0);
            assert!((p - exact).abs() < 1e-9, "{p} vs {exact}");
        }
        // C/ε0 = ε_r · width / gap
        assert!((sol.weighted_energy() / (3.0 * 10.0 / 3.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn multigrid_converges_quickly() {
        let mut d = plate_domain();
        d.rects[1].0 = Rect::new(4.0, 1.5, 6.0, 2.0);
        d.sides = [Boundary::Grounded; 4];
        let meshes: Vec<Mesh> = (0..=3)
            .map(|l| build_mesh(&d, l, 1 << 22).unwrap())
            .collect();
        let sol = solve(&d, meshes, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations < 30, "{}", sol.iterations);
        assert!(*sol.residuals.last().unwrap() < 1e-10);
    }
}
