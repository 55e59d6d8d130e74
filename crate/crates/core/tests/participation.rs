use cpwmask::cpw_analytics::{line_properties, CpwGeometry};
use cpwmask::participation::export::{write_csv, write_vtk};
use cpwmask::participation::mesh::{base_lines, build_mesh, Boundary, Bulk, Domain, Medium, Rect};
use cpwmask::participation::solver::solve;
use cpwmask::participation::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vacuum() -> Medium {
    Medium::Dielectric {
        eps_r: 1.0,
        bulk: Bulk::Vacuum,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn plates(eps_r: f64) -> Domain {
    Domain {
        bounds: Rect::new(0.0, 0.0, 1.0, 1.0),
        background: Medium::Dielectric {
            eps_r,
            bulk: Bulk::Other,
        },
        rects: vec![
            (Rect::new(0.0, 0.0, 1.0, 0.1), Medium::Conductor(0)),
            (Rect::new(0.0, 0.9, 1.0, 1.0), Medium::Conductor(1)),
        ],
        potentials: vec![1.0, 0.0],
        sides: [
            Boundary::Open,
            Boundary::Open,
            Boundary::Grounded,
            Boundary::Grounded,
        ],
        h_min: 0.05,
        h_max: 0.2,
        growth: 1.5,
        mirror_x: None,
        x_keys: vec![],
        y_keys: vec![],
    }
}

fn solve_to(domain: &Domain, level: u32) -> FieldSolution {
    let meshes = (0..=level)
        .map(|l| build_mesh(domain, l, usize::MAX).unwrap())
        .collect();
    solve(domain, meshes, &SolverOptions::default()).unwrap()
}

#[test]
fn parallel_plate_export_has_uniform_field() {
    let sol = solve_to(&plates(4.0), 2);
    assert!(sol.converged);
    // 1 V across 0.8 µm, with ε_r = 4 over the full 1 µm width
    assert!(rel(sol.weighted_energy(), 4.0 / 0.8) < 1e-10);
    let mut buf = Vec::new();
    write_csv(&sol, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_um,y_um,phi_V,Emag_V_per_m"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), sol.mesh.node_count());
    let mut seen = 0;
    for r in &rows {
        if (0.1..=0.9).contains(&r[1]) {
            assert!(rel(r[3], 1.25e6) < 1e-8, "{r:?}");
            assert!((r[2] - (0.9 - r[1]) / 0.8).abs() < 1e-9);
            seen += 1;
        }
    }
    assert!(seen > 100);
}

#[test]
fn vtk_export_lists_every_node() {
    let sol = solve_to(&plates(1.0), 0);
    let mut buf = Vec::new();
    write_vtk(&sol, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let n = sol.mesh.node_count();
    assert!(text.contains(&format!(
        "DIMENSIONS {} {} 1",
        sol.mesh.x.len(),
        sol.mesh.y.len()
    )));
    assert!(text.contains(&format!("POINT_DATA {n}")));
    let after = text
        .split("SCALARS Emag double 1\nLOOKUP_TABLE default\n")
        .nth(1)
        .unwrap();
    assert_eq!(after.lines().count(), n);
}

/// ∫ ln|p - y| ds over the segment a→b.
fn log_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    let (ux, uy) = (dx / len, dy / len);
    let (rx, ry) = (p.0 - a.0, p.1 - a.1);
    let s0 = rx * ux + ry * uy;
    let n = (rx * uy - ry * ux).abs();
    let f = |t: f64| {
        let r2 = t * t + n * n;
        let log_term = if r2 > 0.0 { 0.5 * t * r2.ln() } else { 0.0 };
        let atan_term = if n > 0.0 { n * (t / n).atan() } else { 0.0 };
        log_term - t + atan_term
    };
    f(len - s0) - f(-s0)
}

/// Square boundary of side `side`, `per_side` panels per edge clustered at corners.
fn square_panels(side: f64, per_side: usize) -> Vec<((f64, f64), (f64, f64))> {
    let h = side / 2.0;
    let corners = [(-h, -h), (h, -h), (h, h), (-h, h)];
    let mut out = Vec::new();
    for c in 0..4 {
        let (a, b) = (corners[c], corners[(c + 1) % 4]);
        let at = |k: usize| {
            let u = 0.5 - 0.5 * (std::f64::consts::PI * k as f64 / per_side as f64).cos();
            (a.0 + (b.0 - a.0) * u, a.1 + (b.1 - a.1) * u)
        };
        for k in 0..per_side {
            out.push((at(k), at(k + 1)));
        }
    }
    out
}

/// Boundary-element capacitance per length over ε of a square conductor of
/// side `a` at 1 V centred in a grounded square box of side `b`.
fn bem_square_coax(a: f64, b: f64, per_side: usize) -> f64 {
    let inner = square_panels(a, per_side);
    let outer = square_panels(b, per_side);
    let panels: Vec<_> = inner.iter().chain(&outer).copied().collect();
    let n = panels.len();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for (i, &(pa, pb)) in panels.iter().enumerate() {
        let mid = (0.5 * (pa.0 + pb.0), 0.5 * (pa.1 + pb.1));
        for (k, &(qa, qb)) in panels.iter().enumerate() {
            m[(i, k)] = -log_segment(mid, qa, qb) / (2.0 * std::f64::consts::PI);
        }
        // free constant of the 2-D log potential
        m[(i, n)] = 1.0;
        rhs[i] = if i < inner.len() { 1.0 } else { 0.0 };
    }
    for (k, &(qa, qb)) in panels.iter().enumerate() {
        m[(n, k)] = (qb.0 - qa.0).hypot(qb.1 - qa.1);
    }
    let q = m.lu().solve(&rhs).unwrap();
    inner
        .iter()
        .enumerate()
        .map(|(k, &(qa, qb))| q[k] * (qb.0 - qa.0).hypot(qb.1 - qa.1))
        .sum()
}

#[test]
fn square_coax_matches_boundary_elements() {
    let coarse = bem_square_coax(1.0, 2.0, 80);
    let oracle = bem_square_coax(1.0, 2.0, 160);
    assert!(
        rel(coarse, oracle) < 5e-4,
        "oracle not settled: {coarse} vs {oracle}"
    );
    let domain = Domain {
        bounds: Rect::new(-1.0, -1.0, 1.0, 1.0),
        background: vacuum(),
        rects: vec![(Rect::new(-0.5, -0.5, 0.5, 0.5), Medium::Conductor(0))],
        potentials: vec![1.0],
        sides: [Boundary::Grounded; 4],
        h_min: 0.01,
        h_max: 0.1,
        growth: 1.5,
        mirror_x: Some(0.0),
        x_keys: vec![],
        y_keys: vec![],
    };
    let fem = solve_to(&domain, 2).weighted_energy();
    assert!(rel(fem, oracle) < 5e-3, "FEM {fem} vs BEM {oracle}");
}

#[test]
fn default_grid_lines_and_refinement_counts() {
    let d = CrossSectionModel::default().domain().unwrap();
    let (x, _) = base_lines(&d);
    for k in [-6.0, -3.0, 3.0, 6.0] {
        assert!(x.contains(&k), "{k}");
    }
    let counts: Vec<usize> = (0..3)
        .map(|l| build_mesh(&d, l, usize::MAX).unwrap().cell_count())
        .collect();
    for w in counts.windows(2) {
        assert!(w[1] >= 2 * w[0] && w[1] <= 4 * w[0]);
    }
    assert!(counts[2] <= DEFAULT_MAX_CELLS);
}

#[test]
fn over_budget_suggests_a_level() {
    let model = CrossSectionModel {
        max_cells: 500_000,
        ..Default::default()
    };
    match run(&model, 3) {
        Err(ParticipationError::MeshBudget {
            level: 3,
            suggested_level: Some(2),
            ..
        }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn layer_thickness_is_bounded() {
    let m = CrossSectionModel::default().with_layer_thickness(150.0);
    assert!(matches!(
        m.domain(),
        Err(ParticipationError::InvalidModel(_))
    ));
    let m = CrossSectionModel {
        trench_depth_nm: -1.0,
        ..Default::default()
    };
    assert!(matches!(
        m.domain(),
        Err(ParticipationError::InvalidModel(_))
    ));
}

#[test]
fn default_cross_section() {
    let r = run(&CrossSectionModel::default(), 2).unwrap().report;
    assert!((r.sum() - 1.0).abs() <= r.estimated_discretization_error + 1e-3);
    for p in [r.p_ms, r.p_sa, r.p_ma, r.p_substrate, r.p_vacuum] {
        assert!((0.0..=1.0).contains(&p));
    }
    assert!(
        rel(r.capacitance_ff_per_um, 0.147) < 0.2,
        "{}",
        r.capacitance_ff_per_um
    );
    assert!(r.p_ma < r.p_sa && r.p_ma < r.p_ms);
    let table = r.table();
    let head: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(head[..4], ["p_MS", "p_SA", "p_MA", "p_substrate"]);
}

#[test]
fn refinement_two_to_three_moves_p_ms_little() {
    let r2 = run(&CrossSectionModel::default(), 2).unwrap().report;
    let r3 = run(&CrossSectionModel::default(), 3).unwrap().report;
    let change = rel(r2.p_ms, r3.p_ms);
    assert!(change < 0.05);
    assert!(r3.estimated_discretization_error >= change);
}

#[test]
fn untrenched_bulk_split_follows_permittivity() {
    let eps = 11.45;
    let model = CrossSectionModel {
        trench_depth_nm: 0.0,
        metal_thickness_um: 0.02,
        ..Default::default()
    }
    .with_layer_thickness(0.0);
    let r = run(&model, 2).unwrap().report;
    assert_eq!((r.p_ms, r.p_sa, r.p_ma), (0.0, 0.0, 0.0));
    // conformal map of a thin CPW: half-spaces share the field, energy splits as ε:1
    assert!(
        (r.p_substrate - eps / (eps + 1.0)).abs() < 0.01,
        "{}",
        r.p_substrate
    );
    let analytic = line_properties(&CpwGeometry::default())
        .unwrap()
        .capacitance_per_length;
    assert!(rel(r.capacitance_ff_per_um, analytic) < 0.03);
}

#[test]
fn mirror_halves_hold_equal_energy() {
    let sol = run(&CrossSectionModel::default(), 1).unwrap().solution;
    let m = &sol.mesh;
    let (mut left, mut right) = (0.0, 0.0);
    for j in 0..m.ny() {
        for i in 0..m.nx() {
            let xc = 0.5 * (m.x[i] + m.x[i + 1]);
            if let Medium::Dielectric { eps_r, .. } = m.cell(i, j) {
                let e = eps_r * sol.cell_grad_sq(i, j);
                if (-6.0..-3.0).contains(&xc) {
                    left += e;
                } else if xc > 3.0 && xc < 6.0 {
                    right += e;
                }
            }
        }
    }
    assert!(rel(left, right) < 1e-6, "{left} {right}");
}

#[test]
fn uniform_scaling_changes_nothing() {
    let base = run(&CrossSectionModel::default(), 1).unwrap().report;
    for k in [0.5, 2.0] {
        let r = run(&CrossSectionModel::default().scaled(k), 1)
            .unwrap()
            .report;
        assert!(base.relative_change(&r) < 1e-6, "k = {k}");
    }
}

#[test]
fn participation_is_linear_in_layer_thickness() {
    let model = CrossSectionModel::default();
    let sol = run(&model, 2).unwrap().solution;
    let at = |t: f64| participation_ratios(&sol, &model.with_layer_thickness(t)).unwrap();
    let base = at(1.0);
    for t in [2.0, 5.0, 10.0] {
        let r = at(t);
        for (a, b) in [
            (r.p_ms, base.p_ms),
            (r.p_sa, base.p_sa),
            (r.p_ma, base.p_ma),
        ] {
            assert!(rel(a / t, b) < 0.01, "t = {t}");
        }
    }
    // the dominant interface also stays linear when the mesh follows t
    let p1 = run(&model.with_layer_thickness(1.0), 2)
        .unwrap()
        .report
        .p_ms;
    let p10 = run(&model.with_layer_thickness(10.0), 2)
        .unwrap()
        .report
        .p_ms;
    assert!(rel(p10 / 10.0, p1) < 0.01);
}

#[test]
fn trenching_lowers_ms_and_substrate() {
    let rs: Vec<ParticipationReport> = [0.0, 50.0, 100.0]
        .iter()
        .map(|&d| {
            run(
                &CrossSectionModel {
                    trench_depth_nm: d,
                    ..Default::default()
                },
                1,
            )
            .unwrap()
            .report
        })
        .collect();
    for w in rs.windows(2) {
        assert!(w[1].p_ms < w[0].p_ms);
        assert!(w[1].p_substrate < w[0].p_substrate);
    }
}

#[test]
fn doubling_the_box_is_negligible() {
    let a = run(&CrossSectionModel::default(), 1).unwrap().report;
    let b = run(
        &CrossSectionModel {
            domain_extent_factor: 60.0,
            ..Default::default()
        },
        1,
    )
    .unwrap()
    .report;
    assert!(rel(a.capacitance_ff_per_um, b.capacitance_ff_per_um) < 1e-3);
    assert!(rel(a.p_ms, b.p_ms) < 1e-3);
}

#[test]
fn strongest_field_sits_at_a_gap_edge() {
    let sol = run(&CrossSectionModel::default(), 2).unwrap().solution;
    let e = sol.node_field();
    let k = (0..e.len()).max_by(|&i, &j| e[i].total_cmp(&e[j])).unwrap();
    let w = sol.mesh.x.len();
    let (x, y) = (sol.mesh.x[k % w], sol.mesh.y[k / w]);
    assert!(
        [3.0, 6.0].iter().any(|&edge| (x.abs() - edge).abs() < 0.15),
        "x = {x}"
    );
    assert!(y.abs() < 0.15, "y = {y}");
}

#[test]
fn unconverged_solution_is_refused() {
    let mut sol = solve_to(&plates(1.0), 1);
    sol.converged = false;
    let err = participation_ratios(&sol, &CrossSectionModel::default()).unwrap_err();
    assert!(matches!(err, ParticipationError::Solver { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn ratios_stay_in_unit_interval(s in 3.0f64..12.0, g in 2.0f64..8.0, eps in 3.0f64..12.0, depth in 0.0f64..400.0) {
        let model = CrossSectionModel {
            trace_width_um: s,
            gap_width_um: g,
            substrate_eps_r: eps,
            trench_depth_nm: depth,
            ..Default::default()
        };
        let r = run(&model, 0).unwrap().report;
        for p in [r.p_ms, r.p_sa, r.p_ma, r.p_substrate, r.p_vacuum] {
            prop_assert!((0.0..=1.0).contains(&p));
        }
        prop_assert!((r.sum() - 1.0).abs() < 1e-9);
        prop_assert!(r.capacitance_ff_per_um > 0.0);
    }
}
