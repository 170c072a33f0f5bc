use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spicl::estimator::{cost, sign_selection, EstimatorState, ProjectionSet};
use spicl::experiment::frozen_stack_flow;
use spicl::history_stack::MemoryRegressor;
use spicl::Matrix64;

fn spd(rng: &mut ChaCha8Rng, p: usize) -> Matrix64 {
    let a = Matrix64::from_vec(p, p, (0..p * p).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let mut m = a.gram();
    for i in 0..p {
        m[(i, i)] += 0.5;
    }
    m
}

/// Gaussian elimination with partial pivoting.
fn solve(a: &Matrix64, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = a.row(i).to_vec();
            r.push(b[i]);
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            let pivot_row = m[c].clone();
            for (a, b) in m[r][c..].iter_mut().zip(&pivot_row[c..]) {
                *a -= f * b;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

fn estimator(p: usize, lambda: f64) -> EstimatorState<f64> {
    EstimatorState {
        theta_hat: vec![0.0; p],
        adaptation_gain: vec![1.0; p],
        icl_gain: 0.1,
        sparsity: lambda,
        projection: ProjectionSet {
            radius: 5.0,
            boundary: 0.5,
            slack: 1e-2,
        },
    }
}

#[test]
fn unregularized_fixed_point_is_least_squares_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = 5;
    let ysum = spd(&mut rng, p);
    let usum: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let star = solve(&ysum, &usum);
    let est = estimator(p, 0.0);
    let d = est
        .direction_at(
            &star,
            &Matrix64::zeros(1, p),
            &[0.0],
            &ysum,
            &usum,
            &sign_selection(&star),
        )
        .unwrap();
    assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
}

#[test]
fn update_direction_descends_the_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = 6;
    for _ in 0..50 {
        let ysum = spd(&mut rng, p);
        let usum: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let theta: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let est = estimator(p, rng.gen_range(0.0..0.5));
        let d = est
            .direction_at(
                &theta,
                &Matrix64::zeros(1, p),
                &[0.0],
                &ysum,
                &usum,
                &sign_selection(&theta),
            )
            .unwrap();
        let s = 1e-6;
        let moved: Vec<f64> = theta.iter().zip(&d).map(|(a, b)| a + s * b).collect();
        assert!(cost(&moved, &ysum, &usum, est.sparsity) < cost(&theta, &ysum, &usum, est.sparsity));
    }
}

#[test]
fn flow_settles_at_sampled_cost_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = 4;
    let ysum = spd(&mut rng, p);
    // 𝒰 chosen so the regularized minimizer has one exact zero.
    let usum = vec![1.0, 0.02, -0.8, 0.5];
    let lambda = 0.1;
    let mr = MemoryRegressor {
        ysum: ysum.clone(),
        usum: usum.clone(),
        kappa: 0.01,
        lambda_min: 0.0,
    };
    let theta = frozen_stack_flow(&estimator(p, lambda), &mr, 1e-3, 400.0).unwrap();
    let j0 = cost(&theta, &ysum, &usum, lambda);
    for _ in 0..2000 {
        let probe: Vec<f64> = theta.iter().map(|t| t + rng.gen_range(-1e-2..1e-2)).collect();
        assert!(cost(&probe, &ysum, &usum, lambda) >= j0 - 1e-9);
    }
}

#[test]
fn estimate_stays_in_inflated_ball_under_outward_pressure() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = 8;
    let set = ProjectionSet {
        radius: 5.0,
        boundary: 0.5,
        slack: 1e-2,
    };
    let gain: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..2.0)).collect();
    let lambda_gamma = 0.05;
    let h = 1e-3;
    let mut theta: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut peak = 0.0f64;
    for _ in 0..20_000 {
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let v: Vec<f64> = theta
            .iter()
            .map(|t| 50.0 * t / norm + rng.gen_range(-20.0..20.0))
            .collect();
        let dir = set.project(&theta, &v, &gain).unwrap();
        let sign = sign_selection(&theta);
        for i in 0..p {
            theta[i] += h * (dir[i] - lambda_gamma * gain[i] * sign[i]);
        }
        peak = peak.max(theta.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    assert!(peak > 5.0, "pressure never reached the boundary layer");
    assert!(peak <= set.outer_radius() + set.slack, "peak {peak}");
}
