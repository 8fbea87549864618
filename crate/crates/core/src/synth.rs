//! Synthetic national supply-chain generator.
//!
//! Produces a weighted network with fat-tailed degrees and link weights,
//! skewed sector sizes (so same-sector-pair swap bridges exist), tunable
//! reciprocity, and a matching essentiality matrix. Deterministic given the
//! seed; weights respect the standard ingestion threshold of 3000.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FirmId, Mode, NetworkBuilder, ScNetwork, SectorCode};
use crate::production::{Essentiality, EssentialityMatrix};
use crate::weight::Weight;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_firms: usize,
    pub n_sectors: usize,
    /// Pareto exponent for degree propensities (> 1).
    pub degree_exponent: f64,
    /// Pareto exponent for link weights (> 1).
    pub weight_exponent: f64,
    /// Probability that a link gets a reverse partner, in [0,1].
    pub reciprocity_target: f64,
    /// Fraction of division pairs marked Essential, in [0,1].
    pub essentiality_density: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_firms: 200,
            n_sectors: 12,
            degree_exponent: 2.1,
            weight_exponent: 2.0,
            reciprocity_target: 0.15,
            essentiality_density: 0.35,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_firms < 2 {
            return Err(Error::Config("n_firms must be ≥ 2".into()));
        }
        if self.n_sectors < 1 || self.n_sectors > self.n_firms {
            return Err(Error::Config(format!(
                "n_sectors must be in [1, n_firms], got {}",
                self.n_sectors
            )));
        }
        if self.n_sectors > 80 {
            return Err(Error::Config("n_sectors must be ≤ 80".into()));
        }
        if self.degree_exponent <= 1.0 || self.weight_exponent <= 1.0 {
            return Err(Error::Config("exponents must be > 1".into()));
        }
        for (name, v) in [
            ("reciprocity_target", self.reciprocity_target),
            ("essentiality_density", self.essentiality_density),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

fn pareto(rng: &mut impl Rng, exponent: f64) -> f64 {
    let u: f64 = rng.random::<f64>().max(1e-12);
    u.powf(-1.0 / (exponent - 1.0))
}

/// Group-level code with one 2-digit division per sector, so essentiality
/// (keyed on divisions) resolves at sector-pair granularity.
fn sector_code(idx: usize) -> SectorCode {
    SectorCode::new(&format!("{}", (10 + idx) * 10 + idx % 10)).unwrap()
}

/// Generates the network and its essentiality matrix.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(ScNetwork, EssentialityMatrix)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_firms;

    // Zipf-skewed sector assignment; the first n_sectors firms pin one firm
    // per sector so every sector exists.
    let zipf: Vec<f64> = (0..spec.n_sectors).map(|i| 1.0 / (i + 1) as f64).collect();
    let zipf_total: f64 = zipf.iter().sum();
    let mut sectors: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        if i < spec.n_sectors {
            sectors.push(i);
            continue;
        }
        let mut draw = rng.random::<f64>() * zipf_total;
        let mut pick = 0;
        for (s, &p) in zipf.iter().enumerate() {
            if draw < p {
                pick = s;
                break;
            }
            draw -= p;
            pick = s;
        }
        sectors.push(pick);
    }

    // Fat-tailed in/out propensities. Out-degrees are shifted down by one so
    // a sizable share of firms are pure buyers; they form the absorbing
    // boundary that keeps demand-side cascades from echoing forever, like
    // the retail/terminal layer of real subnetworks.
    let out_deg: Vec<usize> = (0..n)
        .map(|_| {
            let d = pareto(&mut rng, spec.degree_exponent).round() as usize;
            d.saturating_sub(1).min(n - 1)
        })
        .collect();
    let in_prop: Vec<f64> = (0..n).map(|_| pareto(&mut rng, spec.degree_exponent)).collect();
    let in_total: f64 = in_prop.iter().sum();

    let mut b = NetworkBuilder::new(Mode::Weighted);
    let firms: Vec<FirmId> = (0..n)
        .map(|i| b.add_firm(&format!("F{i:06}"), sector_code(sectors[i])))
        .collect();

    let draw_weight = |rng: &mut ChaCha8Rng| -> Weight {
        let units = 3000.0 * pareto(rng, spec.weight_exponent);
        Weight::from_f64(units.min(1e12)).unwrap()
    };

    let mut pairs = std::collections::HashSet::new();
    let mut edges: Vec<(FirmId, FirmId, Weight)> = Vec::new();
    for (i, &d) in out_deg.iter().enumerate() {
        let mut placed = 0;
        let mut attempts = 0;
        while placed < d && attempts < d * 20 {
            attempts += 1;
            // preferential target choice by in-propensity
            let mut draw = rng.random::<f64>() * in_total;
            let mut j = n - 1;
            for (cand, &p) in in_prop.iter().enumerate() {
                if draw < p {
                    j = cand;
                    break;
                }
                draw -= p;
            }
            if j == i || !pairs.insert((i, j)) {
                continue;
            }
            edges.push((firms[i], firms[j], draw_weight(&mut rng)));
            placed += 1;
        }
    }
    // reciprocity pass
    let base_edges = edges.len();
    for idx in 0..base_edges {
        let (s, t, _) = edges[idx];
        if rng.random::<f64>() < spec.reciprocity_target
            && pairs.insert((t.index(), s.index()))
        {
            edges.push((t, s, draw_weight(&mut rng)));
        }
    }
    // every firm trades at least once (firms enter transaction data only
    // through links); isolated draws become pure buyers
    let mut degree = vec![0usize; n];
    for &(s, t, _) in &edges {
        degree[s.index()] += 1;
        degree[t.index()] += 1;
    }
    for i in 0..n {
        if degree[i] > 0 {
            continue;
        }
        loop {
            let s = rng.random_range(0..n);
            if s != i && pairs.insert((s, i)) {
                edges.push((firms[s], firms[i], draw_weight(&mut rng)));
                degree[s] += 1;
                degree[i] += 1;
                break;
            }
        }
    }
    for (s, t, w) in edges {
        b.add_link(s, t, w)?;
    }
    let net = b.finish()?;

    // essentiality over the division pairs that exist in the generated codes
    let mut divisions: Vec<String> = (0..spec.n_sectors)
        .map(|i| sector_code(i).nace2().to_string())
        .collect();
    divisions.sort();
    divisions.dedup();
    let mut ess = EssentialityMatrix::new(Essentiality::NonEssential);
    for sup in &divisions {
        for buy in &divisions {
            if rng.random::<f64>() < spec.essentiality_density {
                ess.set(sup, buy, Essentiality::Essential);
            } else {
                ess.set(sup, buy, Essentiality::NonEssential);
            }
        }
    }
    Ok((net, ess))
}

/// Provenance sidecar written next to generated artifacts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: SynthSpec,
    pub n_firms: usize,
    pub n_links: usize,
}
