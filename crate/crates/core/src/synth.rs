//! Synthetic heterogeneous datasets for tests, demos, and property checks.

use crate::dataset::TabularDataset;
use crate::numerics::{Matrix, Rng};

/// Rows driven by `rank` latent factors, squashed into `(0.2, 0.8)`.
pub fn low_rank_rows(n: usize, widths: &[usize], rank: usize, seed: u64) -> Matrix {
    let d: usize = widths.iter().sum();
    let mut rng = Rng::new(seed);
    let mixing: Vec<f64> = (0..d * rank).map(|_| rng.normal()).collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let latent: Vec<f64> = (0..rank).map(|_| rng.uniform(-1.0, 1.0)).collect();
        for j in 0..d {
            let s: f64 = (0..rank).map(|k| mixing[j * rank + k] * latent[k]).sum();
            data.push(0.5 + 0.3 * s.tanh());
        }
    }
    Matrix::from_vec(n, d, data).expect("sizes agree")
}

/// Labeled multi-branch data: each class has a centre in a 2-D latent space;
/// signal branches are fixed random linear views of the latent point plus
/// small noise, noise branches are independent standard normals.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBlobs {
    pub n_classes: usize,
    pub branch_widths: Vec<usize>,
    /// Branch indices that carry pure noise.
    pub noise_branches: Vec<usize>,
    /// Radius of the circle the class centres sit on.
    pub separation: f64,
    /// Standard deviation of the latent point around its class centre.
    pub spread: f64,
    /// Standard deviation of the per-feature observation noise in signal branches.
    pub feature_noise: f64,
    /// Fixes the class centres and mixing matrices.
    pub seed: u64,
}

impl LatentBlobs {
    pub fn new(n_classes: usize, branch_widths: Vec<usize>, seed: u64) -> Self {
        Self {
            n_classes,
            branch_widths,
            noise_branches: Vec::new(),
            separation: 3.0,
            spread: 0.4,
            feature_noise: 0.05,
            seed,
        }
    }

    pub fn with_noise_branches(mut self, branches: Vec<usize>) -> Self {
        self.noise_branches = branches;
        self
    }

    pub fn n_features(&self) -> usize {
        self.branch_widths.iter().sum()
    }

    /// `per_class` rows per class, drawn from the stream `sample_seed`.
    pub fn generate(&self, per_class: usize, sample_seed: u64) -> TabularDataset {
        const LATENT: usize = 2;
        let mut structure = Rng::new(self.seed);
        let offset = structure.uniform(0.0, std::f64::consts::TAU);
        let centres: Vec<[f64; LATENT]> = (0..self.n_classes)
            .map(|c| {
                let angle = offset + std::f64::consts::TAU * c as f64 / self.n_classes as f64;
                [self.separation * angle.cos(), self.separation * angle.sin()]
            })
            .collect();
        let mixing: Vec<Vec<[f64; LATENT]>> = self
            .branch_widths
            .iter()
            .map(|&w| {
                (0..w)
                    .map(|_| [structure.normal(), structure.normal()])
                    .collect()
            })
            .collect();

        let mut rng = Rng::derive(self.seed, sample_seed);
        let d = self.n_features();
        let mut data = Vec::with_capacity(per_class * self.n_classes * d);
        let mut labels = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per_class {
                let latent = [
                    centre[0] + self.spread * rng.normal(),
                    centre[1] + self.spread * rng.normal(),
                ];
                for (j, rows) in mixing.iter().enumerate() {
                    let noise_only = self.noise_branches.contains(&j);
                    for a in rows {
                        let v = if noise_only {
                            rng.normal()
                        } else {
                            a[0] * latent[0] + a[1] * latent[1] + self.feature_noise * rng.normal()
                        };
                        data.push(v);
                    }
                }
                labels.push(format!("class{c}"));
            }
        }
        let features = Matrix::from_vec(labels.len(), d, data).expect("sizes agree");
        let names = (0..d).map(|i| format!("f{i}")).collect();
        TabularDataset::from_label_strings(features, &labels, names).expect("well-formed")
    }
}
