//! Thin-layer and bulk participation from a solved cross-section.

use serde::{Deserialize, Serialize};

use super::mesh::{Bulk, Medium};
use super::solver::FieldSolution;
use super::{CrossSectionModel, ParticipationError};
use crate::cpw_analytics::EPS0;

/// Participation of each region in the electric energy of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipationReport {
    pub p_ms: f64,
    pub p_sa: f64,
    pub p_ma: f64,
    pub p_substrate: f64,
    pub p_vacuum: f64,
    pub capacitance_ff_per_um: f64,
    pub mesh_cells: usize,
    pub level: u32,
    pub iterations: usize,
    pub estimated_discretization_error: f64,
}

impl ParticipationReport {
    pub fn sum(&self) -> f64 {
        self.p_ms + self.p_sa + self.p_ma + self.p_substrate + self.p_vacuum
    }

    /// Largest relative difference of any ratio or the capacitance.
    pub fn relative_change(&self, other: &Self) -> f64 {
        let pairs = [
            (self.p_ms, other.p_ms),
            (self.p_sa, other.p_sa),
            (self.p_ma, other.p_ma),
            (self.p_substrate, other.p_substrate),
            (self.p_vacuum, other.p_vacuum),
            (self.capacitance_ff_per_um, other.capacitance_ff_per_um),
        ];
        pairs
            .iter()
            .map(|&(a, b)| {
                if a == 0.0 && b == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / a.abs().max(b.abs())
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    /// Header and row in the column order p_MS, p_SA, p_MA, p_substrate, C.
    pub fn table(&self) -> String {
        format!(
            "{:>12} {:>12} {:>12} {:>12} {:>12}\n{:>12.4e} {:>12.4e} {:>12.4e} {:>12.4} {:>12.4}\n",
            "p_MS",
            "p_SA",
            "p_MA",
            "p_substrate",
            "C (fF/um)",
            self.p_ms,
            self.p_sa,
            self.p_ma,
            self.p_substrate,
            self.capacitance_ff_per_um
        )
    }
}

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

#[derive(Default)]
struct Tally {
    ms: f64,
    sa: f64,
    ma: f64,
    host_sub: f64,
    host_vac: f64,
}

/// Computes region participations.
///
/// A thin layer is treated as a perturbation: its field follows from the
/// unperturbed surface field through continuity of tangential E and normal
/// D, and it displaces an equal thickness of the host it is grown into
/// (substrate for MS and SA, vacuum for MA). All energies are divided by
/// the energy of the perturbed stack so the five ratios sum to one.
pub fn participation_ratios(
    sol: &FieldSolution,
    model: &CrossSectionModel,
) -> Result<ParticipationReport, ParticipationError> {
    if !sol.converged {
        return Err(ParticipationError::Solver {
            reason: "refusing to report on an unconverged solution".into(),
            residuals: sol.residuals.clone(),
        });
    }
    let m = &sol.mesh;
    let eps_s = model.substrate_eps_r;
    let (t_ms, t_sa, t_ma) = (
        model.ms_thickness_nm * 1e-3,
        model.sa_thickness_nm * 1e-3,
        model.ma_thickness_nm * 1e-3,
    );
    let (e_ms, e_sa, e_ma) = (model.ms_eps_r, model.sa_eps_r, model.ma_eps_r);

    // bulk integrals, one partial sum per row
    let mut sub_rows = Vec::with_capacity(m.ny());
    let mut vac_rows = Vec::with_capacity(m.ny());
    let mut oth_rows = Vec::with_capacity(m.ny());
    for j in 0..m.ny() {
        let (mut s, mut v, mut o) = (0.0, 0.0, 0.0);
        for i in 0..m.nx() {
            if let Medium::Dielectric { eps_r, bulk } = m.cell(i, j) {
                let e = eps_r * sol.cell_grad_sq(i, j);
                match bulk {
                    Bulk::Substrate => s += e,
                    Bulk::Vacuum => v += e,
                    Bulk::Other => o += e,
                }
            }
        }
        sub_rows.push(s);
        vac_rows.push(v);
        oth_rows.push(o);
    }
    let w_sub: f64 = pairwise(&sub_rows);
    let w_vac: f64 = pairwise(&vac_rows);
    let w_oth: f64 = pairwise(&oth_rows);
    let w = w_sub + w_vac + w_oth;
    if !(w > 0.0) {
        return Err(ParticipationError::Solver {
            reason: "field energy is zero".into(),
            residuals: sol.residuals.clone(),
        });
    }

    // faces: (cell a, cell b, normal along x?)
    let mut t = Tally::default();
    let mut face = |a: (usize, usize), b: (usize, usize), along_x: bool, len: f64| {
        let (ma, mb) = (m.cell(a.0, a.1), m.cell(b.0, b.1));
        // field samples on the shared face, from each side
        let sample = |c: (usize, usize), on_high_side: bool| -> [(f64, f64); 2] {
            let edge = if on_high_side { 1.0 } else { 0.0 };
            GAUSS.map(|g| {
                let (gx, gy) = if along_x {
                    sol.gradient(c.0, c.1, edge, g)
                } else {
                    sol.gradient(c.0, c.1, g, edge)
                };
                if along_x {
                    (gx, gy)
                } else {
                    (gy, gx)
                }
            })
        };
        match (ma, mb) {
            (Medium::Conductor(_), Medium::Dielectric { bulk, .. })
            | (Medium::Dielectric { bulk, .. }, Medium::Conductor(_)) => {
                let (d, high) = if matches!(ma, Medium::Conductor(_)) {
                    (b, false)
                } else {
                    (a, true)
                };
                let en2: f64 = sample(d, high).iter().map(|&(n, _)| n * n).sum::<f64>() * 0.5 * len;
                let e2: f64 = sample(d, high)
                    .iter()
                    .map(|&(n, tg)| n * n + tg * tg)
                    .sum::<f64>()
                    * 0.5
                    * len;
                match bulk {
                    Bulk::Substrate => {
                        t.ms += t_ms * eps_s * eps_s / e_ms * en2;
                        t.host_sub += t_ms * eps_s * e2;
                    }
                    Bulk::Vacuum => {
                        t.ma += t_ma / e_ma * en2;
                        t.host_vac += t_ma * e2;
                    }
                    Bulk::Other => {}
                }
            }
            (Medium::Dielectric { bulk: ba, .. }, Medium::Dielectric { bulk: bb, .. })
                if (ba == Bulk::Substrate && bb == Bulk::Vacuum)
                    || (ba == Bulk::Vacuum && bb == Bulk::Substrate) =>
            {
                let (s_side, v_side) = if ba == Bulk::Substrate {
                    ((a, true), (b, false))
                } else {
                    ((b, false), (a, true))
                };
                let fs = sample(s_side.0, s_side.1);
                let fv = sample(v_side.0, v_side.1);
                let mut layer = 0.0;
                let mut host = 0.0;
                for k in 0..2 {
                    let dn = 0.5 * (eps_s * fs[k].0 + fv[k].0);
                    let et = 0.5 * (fs[k].1 + fv[k].1);
                    layer += e_sa * et * et + dn * dn / e_sa;
                    host += eps_s * (fs[k].0 * fs[k].0 + fs[k].1 * fs[k].1);
                }
                t.sa += t_sa * layer * 0.5 * len;
                t.host_sub += t_sa * host * 0.5 * len;
            }
            _ => {}
        }
    };
    for j in 0..m.ny() {
        for i in 0..m.nx() {
            if i + 1 < m.nx() {
                face((i, j), (i + 1, j), true, m.y[j + 1] - m.y[j]);
            }
            if j + 1 < m.ny() {
                face((i, j), (i, j + 1), false, m.x[i + 1] - m.x[i]);
            }
        }
    }

    let wp = w - t.host_sub - t.host_vac + t.ms + t.sa + t.ma;
    // C per length from the unperturbed solve: C = ε0 ∫ε_r|∇φ|² / V², in fF/µm
    let capacitance_ff_per_um = EPS0 * w * 1e9;
    Ok(ParticipationReport {
        p_ms: t.ms / wp,
        p_sa: t.sa / wp,
        p_ma: t.ma / wp,
        p_substrate: (w_sub - t.host_sub) / wp,
        p_vacuum: (w_vac + w_oth - t.host_vac) / wp,
        capacitance_ff_per_um,
        mesh_cells: m.cell_count(),
        level: m.level,
        iterations: sol.iterations,
        estimated_discretization_error: 0.0,
    })
}

fn pairwise(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let h = v.len() / 2;
    pairwise(&v[..h]) + pairwise(&v[h..])
}
