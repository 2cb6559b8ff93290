use gelation::duality::solve_duality;
use gelation::ensemble::{ensemble_moment_limits, ensemble_moments, jump_law};

const GRID: [usize; 4] = [250, 500, 1000, 2000];

fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn moments_converge_at_rate_one_over_n() {
    for c in [0.5, 2.0] {
        let lim = ensemble_moment_limits(&solve_duality(c).unwrap());
        let mut gaps: [Vec<f64>; 4] = Default::default();
        for &n in &GRID {
            let m = ensemble_moments(&jump_law::<f64>(n, c, 1.0).unwrap());
            let g = [m.z - lim.z, m.mean - lim.mean, m.second - lim.second, m.variance - lim.variance];
            for (i, d) in g.iter().enumerate() {
                gaps[i].push(d.abs());
            }
        }
        let logn: Vec<f64> = GRID.iter().map(|&n| (n as f64).ln()).collect();
        for (i, g) in gaps.iter().enumerate() {
            let slope = fitted_slope(&logn, &g.iter().map(|x| x.ln()).collect::<Vec<_>>());
            assert!((-1.2..=-0.8).contains(&slope), "c={c} moment {i}: slope {slope}");
            assert!(g[3] <= 50.0 / 2000.0, "c={c} moment {i}: gap {}", g[3]);
        }
    }
}
