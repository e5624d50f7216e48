use specgof::models::{SpectralFamily, SpectralModel};
use specgof::sim::{simulate, DgpKind, DgpSpec};
use specgof::spectral::periodogram;
use specgof::whittle;

fn qr_residual(ratios: &[f64], gammas: &[Vec<f64>], window: std::ops::Range<usize>, target: usize) -> f64 {
    let rows: Vec<usize> = window.collect();
    let c1: Vec<f64> = rows.iter().map(|&k| gammas[k][0]).collect();
    let mut c2: Vec<f64> = rows.iter().map(|&k| gammas[k][1]).collect();
    let mut y: Vec<f64> = rows.iter().map(|&k| ratios[k]).collect();
    let r11 = c1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let q1: Vec<f64> = c1.iter().map(|v| v / r11).collect();
    let r12: f64 = q1.iter().zip(&c2).map(|(a, b)| a * b).sum();
    for (v, q) in c2.iter_mut().zip(&q1) { *v -= r12 * q; }
    let r22 = c2.iter().map(|v| v * v).sum::<f64>().sqrt();
    let q2: Vec<f64> = c2.iter().map(|v| v / r22).collect();
    let z1: f64 = q1.iter().zip(&y).map(|(a, b)| a * b).sum();
    for (v, q) in y.iter_mut().zip(&q1) { *v -= z1 * q; }
    let z2: f64 = q2.iter().zip(&y).map(|(a, b)| a * b).sum();
    let b2 = z2 / r22;
    let b1 = (z1 - r12 * b2) / r11;
    let g = &gammas[target];
    let w1 = g[0] / r11;
    let w2 = (g[1] - r12 * w1) / r22;
    let h = w1 * w1 + w2 * w2;
    (ratios[target] - (g[0] * b1 + g[1] * b2)) / (1.0 + h).sqrt()
}

fn main() {
    let families = [SpectralFamily::ar1(), SpectralFamily::ma1(), SpectralFamily::arfima()];
    let mut worst = (0.0f64, String::new());
    for family in &families {
        for &t in &[32usize, 64, 128] {
            for s in 0..100u64 {
                let x = simulate(&DgpSpec::new(DgpKind::Iid, vec![], t, 30_000 + s)).unwrap();
                let pg = periodogram(&x).unwrap();
                let fit = whittle::fit(&pg, family).unwrap();
                let ratios = whittle::spectral_ratios(&pg, family, &fit.theta_hat).unwrap();
                let gammas: Vec<Vec<f64>> = (1..=pg.t_tilde())
                    .map(|j| family.regressor(&fit.theta_hat, pg.freq(j)).unwrap())
                    .collect();
                let n = ratios.len();
                let interior = fit.theta_hat.values()[0].abs() < 0.95;
                if !interior { continue; }
                let fwd = specgof::gof::forward_residuals(&ratios, &gammas).unwrap();
                for (j, &e) in fwd.iter().enumerate() {
                    let d = (e - qr_residual(&ratios, &gammas, j + 1..n, j)).abs();
                    if d > worst.0 {
                        worst = (d, format!("fwd {} T={t} seed={s} idx={j}/{} theta={:.4}", family.name(), fwd.len(), fit.theta_hat.values()[0]));
                    }
                }
                let bwd = specgof::gof::backward_residuals(&ratios, &gammas).unwrap();
                for (i, &e) in bwd.iter().enumerate() {
                    let d = (e - qr_residual(&ratios, &gammas, 0..i + 2, i + 2)).abs();
                    if d > worst.0 {
                        worst = (d, format!("bwd {} T={t} seed={s} idx={i}/{} theta={:.4}", family.name(), bwd.len(), fit.theta_hat.values()[0]));
                    }
                }
            }
        }
    }
    println!("worst diff {:.3e} at {}", worst.0, worst.1);
}
