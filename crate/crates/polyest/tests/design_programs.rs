//! End-to-end checks of the master design programs: degenerate cases, the
//! agreement of the general builder with the Gaussian specialization, the
//! zeroing and monotonicity properties, and the quality of assembled
//! contrasts.

mod common;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use polyest::conic::SolverOptions;
use polyest::design::{
    assemble_contrast, assemble_ellitope_contrast, assemble_polytope_contrast, certified_risk,
    solve_master, solve_master_gaussian, ybar_primal, ContrastSide, DesignMode, DesignOptions,
};
use polyest::instance::ProblemInstance;
use polyest::linalg::max_abs;
use polyest::sets::sbar_matrix;

fn opts(mode: DesignMode) -> DesignOptions {
    DesignOptions::with_mode(mode)
}

#[test]
fn zero_target_map_gives_zero_objective() {
    let mut inst = common::mixture_instance(4, 100, 11);
    inst.b = DMatrix::zeros(4, 4);
    let sol = solve_master(&inst, 1e-3, &opts(DesignMode::Full)).unwrap();
    assert!(sol.objective.abs() <= 1e-6, "objective {}", sol.objective);
    assert!(sol.diagnostics.violations.is_empty(), "{:?}", sol.diagnostics.violations);
}

#[test]
fn general_master_matches_gaussian_specialization() {
    // On the first experiment's geometry with Euclidean-ball noise the
    // general builder and the specialized program are the same convex
    // problem written in two different conic forms.
    let inst = common::ball_instance(8, 6, 4.0, 3.0, 2.5, 0.05, 50.0, 8.0, 21);
    let delta = 1e-3;
    let a = solve_master(&inst, delta, &opts(DesignMode::Full)).unwrap();
    let b = solve_master_gaussian(&inst, delta, &opts(DesignMode::Full)).unwrap();
    let gap = (a.objective - b.objective).abs();
    assert!(
        gap <= 2e-5 * (1.0 + a.objective.abs()),
        "general {} vs specialized {}",
        a.objective,
        b.objective
    );
    assert!(a.diagnostics.violations.is_empty(), "{:?}", a.diagnostics.violations);
    assert!(b.diagnostics.violations.is_empty(), "{:?}", b.diagnostics.violations);
}

#[test]
fn mixture_design_solves_clean() {
    let inst = common::mixture_instance(4, 1000, 31);
    let sol = solve_master(&inst, 1e-3, &opts(DesignMode::Full)).unwrap();
    assert!(sol.objective.is_finite());
    assert!(sol.objective >= -1e-9);
    assert!(sol.diagnostics.violations.is_empty(), "{:?}", sol.diagnostics.violations);
    // Objective decomposition is consistent.
    assert!((sol.objective - sol.radicand()).abs() <= 1e-6 * (1.0 + sol.radicand()));
}

#[test]
fn zeroing_gives_dominance_gaussian() {
    let inst = common::ball_instance(16, 12, 10.0, 8.5, 7.0, 0.01, 1e3, 8.0, 41);
    let delta = 1e-3;
    let full = solve_master_gaussian(&inst, delta, &opts(DesignMode::Full)).unwrap();
    let e_only = solve_master_gaussian(&inst, delta, &opts(DesignMode::EllitopeOnly)).unwrap();
    let p_only = solve_master_gaussian(&inst, delta, &opts(DesignMode::PolytopeOnly)).unwrap();
    assert!(full.objective <= e_only.objective + 1e-6, "{} vs {}", full.objective, e_only.objective);
    assert!(full.objective <= p_only.objective + 1e-6, "{} vs {}", full.objective, p_only.objective);
}

#[test]
fn zeroing_gives_dominance_mixture() {
    let inst = common::mixture_instance(4, 10_000, 43);
    let delta = 1e-3;
    let full = solve_master(&inst, delta, &opts(DesignMode::Full)).unwrap();
    let e_only = solve_master(&inst, delta, &opts(DesignMode::EllitopeOnly)).unwrap();
    let p_only = solve_master(&inst, delta, &opts(DesignMode::PolytopeOnly)).unwrap();
    assert!(full.objective <= e_only.objective + 1e-6);
    assert!(full.objective <= p_only.objective + 1e-6);
}

#[test]
fn enlarging_the_parameter_set_never_hurts() {
    // Componentwise larger upper bounds enlarge the ellitope, keeping the old
    // solution feasible, so the optimum cannot increase.
    use polyest::sets::{Ellitope, MonotoneSet, SignalSet};
    let inst = common::mixture_instance(4, 1000, 47);
    let delta = 1e-3;
    let base = solve_master(&inst, delta, &opts(DesignMode::Full)).unwrap();

    let ell = &inst.signal.ellitope;
    let old_upper = ell.domain().as_box().unwrap();
    let bigger = Ellitope::new(
        ell.p().clone(),
        ell.t().to_vec(),
        MonotoneSet::Box { upper: old_upper * 1.5 },
    )
    .unwrap();
    let signal = SignalSet::new(bigger, inst.signal.polytope.clone(), inst.signal.extras.clone())
        .unwrap();
    let enlarged = ProblemInstance { signal, ..inst.clone() };
    let wider = solve_master(&enlarged, delta, &opts(DesignMode::Full)).unwrap();
    assert!(
        wider.objective <= base.objective + 1e-6 * (1.0 + base.objective.abs()),
        "wider {} vs base {}",
        wider.objective,
        base.objective
    );
}

#[test]
fn gaussian_objective_monotone_in_noise_level() {
    let mut objectives = Vec::new();
    for &sigma in &[0.2_f64, 0.05, 0.01] {
        let inst = common::ball_instance(8, 6, 4.0, 3.0, 2.5, sigma, 50.0, 8.0, 53);
        let sol = solve_master_gaussian(&inst, 1e-3, &opts(DesignMode::Full)).unwrap();
        objectives.push(sol.objective);
    }
    assert!(objectives[0] >= objectives[1] - 1e-7);
    assert!(objectives[1] >= objectives[2] - 1e-7);
}

#[test]
fn assembled_contrasts_reconstruct_and_are_admissible() {
    // Mixture path: randomized extraction of the ellitope block.
    let inst = common::mixture_instance(4, 10_000, 61);
    let delta = 1e-3;
    let design_opts = opts(DesignMode::Full);
    let sol = solve_master(&inst, delta, &design_opts).unwrap();
    let norm = inst.noise.norm(delta, inst.m()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(5);

    let h1 = assemble_ellitope_contrast(&sol, &norm, &mut rng, 64).unwrap();
    let mut recon = DMatrix::zeros(inst.m(), inst.m());
    for (j, info) in h1.columns.iter().enumerate() {
        let c = h1.h.column(j);
        recon += &c * c.transpose() * info.weight;
        assert!(norm.is_admissible(&c.into_owned(), 1e-8).unwrap());
        assert_eq!(info.side, ContrastSide::Ellitope);
    }
    assert!(
        (recon - &sol.theta_mat).norm() <= 1e-8 * sol.theta_mat.norm().max(1e-12),
        "ellitope block reconstruction failed"
    );
    let total: f64 = h1.columns.iter().map(|c| c.weight).sum();
    assert!(total <= sol.rho + 1e-6 * (1.0 + sol.rho));

    // Polytope path: unit norms where the design vector is nonzero.
    let h2 = assemble_polytope_contrast(&sol, &norm).unwrap();
    for j in 0..h2.ncols() {
        let pi = norm.evaluate(&h2.h.column(j).into_owned()).unwrap();
        assert!((pi - 1.0).abs() <= 1e-9, "column norm {pi}");
    }

    // Pruned concatenation keeps admissibility and the column budget.
    let h = assemble_contrast(&sol, &norm, &mut rng, &design_opts).unwrap();
    assert!(h.ncols() <= norm.latent_dim() + inst.signal.polytope.num_vertices());
    for j in 0..h.ncols() {
        assert!(norm.is_admissible(&h.h.column(j).into_owned(), 1e-8).unwrap());
    }
}

#[test]
fn euclidean_assembly_is_eigendecomposition() {
    // With sigma_bar * quantile = 1 the unit ball is the Euclidean ball, and
    // Theta = I yields an orthonormal contrast block.
    use polyest::design::DesignSolution;
    use polyest::design::SolveDiagnostics;
    use polyest::noise::{normal_quantile, NoiseNorm};
    let m = 5;
    let delta = 0.05;
    let q = normal_quantile(1.0 - delta / 2.0).unwrap();
    let norm = NoiseNorm::gaussian(1.0 / q, delta, m).unwrap();
    let sol = DesignSolution {
        theta_mat: DMatrix::identity(m, m),
        xi: DMatrix::identity(m, m),
        zeta: DVector::from_element(m, 1.0),
        rho: m as f64,
        varsigma: 0.0,
        gamma: DVector::zeros(1),
        u_mat: DMatrix::zeros(m, m),
        s_mat: DMatrix::zeros(m, m),
        g: vec![],
        duals: vec![],
        objective: m as f64,
        phi_gamma: 0.0,
        delta,
        theta_loss: 2.0,
        mode: DesignMode::Full,
        diagnostics: SolveDiagnostics {
            status: polyest::conic::SolveStatus::Optimal,
            iterations: 0,
            r_prim: 0.0,
            r_dual: 0.0,
            violations: vec![],
        },
    };
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let h1 = assemble_ellitope_contrast(&sol, &norm, &mut rng, 8).unwrap();
    assert_eq!(h1.ncols(), m);
    let gram = h1.h.transpose() * &h1.h;
    assert!((gram - DMatrix::identity(m, m)).amax() <= 1e-9);

    // Zero Theta gives an empty block.
    let zero_sol = DesignSolution { theta_mat: DMatrix::zeros(m, m), ..sol };
    let h = assemble_ellitope_contrast(&zero_sol, &norm, &mut rng, 8).unwrap();
    assert!(h.is_empty());
}

#[test]
fn certified_risk_arithmetic() {
    let inst = common::mixture_instance(4, 1000, 71);
    let sol = solve_master(&inst, 1e-3, &opts(DesignMode::Full)).unwrap();
    let (eps, bound) = certified_risk(&sol, 3, 2, 1e-3);
    assert!((eps - 5e-3).abs() < 1e-15);
    assert!((bound - 2.0 * sol.radicand().sqrt()).abs() < 1e-12);
}

#[test]
fn weak_duality_of_vertex_constraints() {
    // For every vertex of a solved design, the primal value of the
    // vertex problem over the relaxed set stays below varsigma.
    let inst = common::mixture_instance(4, 1000, 73);
    let delta = 1e-3;
    let sol = solve_master(&inst, delta, &opts(DesignMode::Full)).unwrap();
    let norm = inst.noise.norm(delta, inst.m()).unwrap();
    let poly = &inst.signal.polytope;
    let sbar = sbar_matrix(&sol.s_mat, poly).unwrap();
    let w_map = poly.rq_pinv();
    let solver = SolverOptions::tight();
    for j in 0..poly.num_vertices() {
        let v_j = poly.v().column(j).into_owned();
        let d_j = &sbar * &v_j - w_map.transpose() * inst.a.transpose() * &sol.g[j];
        let primal = ybar_primal(&d_j, &inst.signal.ellitope, poly, &solver).unwrap();
        let lhs = primal + norm.evaluate(&sol.g[j]).unwrap();
        assert!(
            lhs <= sol.varsigma + 1e-6 * (1.0 + sol.varsigma.abs()),
            "vertex {j}: {lhs} vs varsigma {}",
            sol.varsigma
        );
    }
}

#[test]
fn observation_decomposition_chain_holds_on_samples() {
    // Sampled signals from the symmetrization obeying the contrast box obey
    // the certified quadratic decomposition chain.
    let inst = common::mixture_instance(4, 1000, 79);
    let delta = 1e-3;
    let design_opts = opts(DesignMode::Full);
    let sol = solve_master(&inst, delta, &design_opts).unwrap();
    let norm = inst.noise.norm(delta, inst.m()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    let h = assemble_contrast(&sol, &norm, &mut rng, &design_opts).unwrap();
    let solver = SolverOptions::default();
    let radicand_split = sol.phi_gamma + sol.rho;
    let mut checked = 0;
    for _ in 0..500 {
        let mut x = inst.signal.sample_symmetrized(&mut rng, &solver).unwrap();
        let gain = (h.h.transpose() * &inst.a * &x).amax();
        if gain > 1.0 {
            x /= gain; // symmetric convex set: scaling into the box stays inside
        }
        let bx = &inst.b * &x;
        let loss_sq = polyest::linalg::lp_norm(&bx, inst.theta).powi(2);
        let quad = (x.transpose() * (&sol.u_mat + &sol.s_mat) * &x)[0];
        assert!(loss_sq <= quad + 1e-6, "loss {loss_sq} vs quadratic {quad}");
        assert!(
            quad <= radicand_split + sol.varsigma + 1e-6,
            "quadratic {quad} vs certified {}",
            radicand_split + sol.varsigma
        );
        checked += 1;
    }
    assert_eq!(checked, 500);
}

#[test]
fn ellitope_chain_holds_on_samples() {
    // For the assembled ellitope-side block and samples from the ellitope
    // obeying its contrast box, the U-quadratic stays under phi(gamma) + rho.
    let inst = common::mixture_instance(4, 1000, 83);
    let delta = 1e-3;
    let design_opts = opts(DesignMode::Full);
    let sol = solve_master(&inst, delta, &design_opts).unwrap();
    let norm = inst.noise.norm(delta, inst.m()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(19);
    let h1 = assemble_ellitope_contrast(&sol, &norm, &mut rng, 64).unwrap();
    if h1.is_empty() {
        assert!(max_abs(&sol.theta_mat) <= 1e-12);
        return;
    }
    let cap = sol.phi_gamma + sol.rho;
    for _ in 0..500 {
        let mut x = inst.signal.ellitope.sample_interior(&mut rng);
        let gain = (h1.h.transpose() * &inst.a * &x).amax();
        if gain > 1.0 {
            x /= gain;
        }
        let quad = (x.transpose() * &sol.u_mat * &x)[0];
        assert!(quad <= cap + 1e-6, "quadratic {quad} vs cap {cap}");
    }
}
