use specgof::models::{SpectralFamily, SpectralModel};
use specgof::sim::{simulate, DgpKind, DgpSpec};
use specgof::spectral::periodogram;
use specgof::whittle;

fn main() {
    // Pathological: ma1 fit at the box bound (T=32 seed 30065) and a tame
    // interior fit for contrast. Print q/T per forward step.
    for (t, seed) in [(32usize, 30_065u64), (128, 30_000)] {
        let fam = SpectralFamily::ma1();
        let x = simulate(&DgpSpec::new(DgpKind::Iid, vec![], t, seed)).unwrap();
        let pg = periodogram(&x).unwrap();
        let fit = whittle::fit(&pg, &fam).unwrap();
        let ratios = whittle::spectral_ratios(&pg, &fam, &fit.theta_hat).unwrap();
        let gammas: Vec<Vec<f64>> = (1..=pg.t_tilde())
            .map(|j| fam.regressor(&fit.theta_hat, pg.freq(j)).unwrap())
            .collect();
        let tt = ratios.len();
        let dim = 2;
        let t_bar = tt - dim;
        // replicate the forward march, printing q/T
        let mut a = vec![0.0f64; 4];
        // anchor gram (scaled)
        for k in t_bar..tt {
            let g = &gammas[k];
            for i in 0..2 { for j in 0..2 { a[i*2+j] += g[i]*g[j] / tt as f64; } }
        }
        let det = a[0]*a[3] - a[1]*a[2];
        let mut ainv = vec![a[3]/det, -a[1]/det, -a[2]/det, a[0]/det];
        println!("T={t} seed={seed} theta={:.4}", fit.theta_hat.values()[0]);
        for j in (1..t_bar).rev() {
            let u = &gammas[j];
            let au = [ainv[0]*u[0]+ainv[1]*u[1], ainv[2]*u[0]+ainv[3]*u[1]];
            let q = u[0]*au[0] + u[1]*au[1];
            if q / tt as f64 > 10.0 || j + 3 > t_bar {
                println!("  step j={j} q/T = {:.3e}", q / tt as f64);
            }
            let denom = tt as f64 + q;
            for i in 0..2 { for l in 0..2 { ainv[i*2+l] -= au[i]*au[l]/denom; } }
        }
    }
}
