//! Essentiality classification and per-firm generalized Leontief production
//! functions (GLPF), calibrated from the observed network.
//!
//! Output of firm i given delivered inputs per product k:
//!
//! ```text
//! x_i = min( min_{k essential} delivered_k / alpha_ik ,
//!            beta_bar_i + (1/alpha_i) * sum_{k non-essential} delivered_k ,
//!            x0_i )
//! ```
//!
//! Essential inputs bind in Leontief fashion, non-essential inputs reduce
//! output linearly down to the floor `beta_bar`, and capacity caps at the
//! calibrated full output `x0`. Labor and capital terms are treated as
//! always non-binding. Calibration fixes the parameters so that the
//! empirically delivered inputs reproduce `x0` exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FirmId, ScNetwork, SectorId};
use crate::weight::Weight;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Essentiality {
    Essential,
    NonEssential,
    Irrelevant,
}

impl Essentiality {
    pub fn code(self) -> char {
        match self {
            Essentiality::Essential => 'E',
            Essentiality::NonEssential => 'N',
            Essentiality::Irrelevant => 'I',
        }
    }

    pub fn from_code(c: &str) -> std::result::Result<Essentiality, String> {
        match c.trim() {
            "E" => Ok(Essentiality::Essential),
            "N" => Ok(Essentiality::NonEssential),
            "I" => Ok(Essentiality::Irrelevant),
            other => Err(format!("unknown essentiality class '{other}' (want E, N or I)")),
        }
    }
}

/// Survey table: (supplier 2-digit division, buyer 2-digit division) →
/// essentiality class. Lookups never fail; missing pairs take the default.
#[derive(Clone, Debug)]
pub struct EssentialityMatrix {
    map: HashMap<(String, String), Essentiality>,
    default_value: Essentiality,
}

impl EssentialityMatrix {
    pub fn new(default_value: Essentiality) -> EssentialityMatrix {
        EssentialityMatrix {
            map: HashMap::new(),
            default_value,
        }
    }

    /// Matrix with no explicit entries; every pair takes `class`.
    pub fn uniform(class: Essentiality) -> EssentialityMatrix {
        EssentialityMatrix::new(class)
    }

    pub fn default_value(&self) -> Essentiality {
        self.default_value
    }

    pub fn set(&mut self, supplier_nace2: &str, buyer_nace2: &str, class: Essentiality) {
        self.map
            .insert((supplier_nace2.to_string(), buyer_nace2.to_string()), class);
    }

    pub fn lookup(&self, supplier_nace2: &str, buyer_nace2: &str) -> Essentiality {
        self.map
            .get(&(supplier_nace2.to_string(), buyer_nace2.to_string()))
            .copied()
            .unwrap_or(self.default_value)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// CSV with header `supplier_nace2,buyer_nace2,class`, class ∈ {E,N,I}.
    pub fn load_csv(path: impl AsRef<Path>, default_value: Essentiality) -> Result<EssentialityMatrix> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_csv(&text, &path.display().to_string(), default_value)
    }

    pub fn parse_csv(
        text: &str,
        path: &str,
        default_value: Essentiality,
    ) -> Result<EssentialityMatrix> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        if header.trim_start_matches('\u{feff}').trim() != "supplier_nace2,buyer_nace2,class" {
            return Err(err(1, "expected header 'supplier_nace2,buyer_nace2,class'".into()));
        }
        let mut m = EssentialityMatrix::new(default_value);
        for (idx, raw) in lines {
            let line = idx + 1;
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            let fields: Vec<&str> = t.split(',').collect();
            if fields.len() != 3 {
                return Err(err(line, format!("expected 3 fields, found {}", fields.len())));
            }
            let sup = fields[0].trim();
            let buy = fields[1].trim();
            if sup.is_empty() || buy.is_empty() {
                return Err(err(line, "empty division code".into()));
            }
            let class = Essentiality::from_code(fields[2]).map_err(|m| err(line, m))?;
            m.set(sup, buy, class);
        }
        Ok(m)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut rows: Vec<(&(String, String), &Essentiality)> = self.map.iter().collect();
        rows.sort_by_key(|(key, _)| *key);
        let mut out = String::from("supplier_nace2,buyer_nace2,class\n");
        for ((s, b), c) in rows {
            out.push_str(&format!("{s},{b},{}\n", c.code()));
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Calibrated production-function parameters of one firm.
#[derive(Clone, Debug)]
pub struct GlpfParams {
    /// Calibrated full output: empirical out-strength, or 1 for pure sinks.
    pub x0: f64,
    /// Essential inputs: (product, alpha_ik, Π_ik(0)).
    pub essential: Vec<(SectorId, f64, f64)>,
    /// Non-essential inputs: (product, Π_ik(0)).
    pub non_essential: Vec<(SectorId, f64)>,
    /// Σ of non-essential Π_ik(0).
    pub ne_sum0: f64,
    /// Production floor without any non-essential input.
    pub beta_bar: f64,
    /// 1/alpha_i of the linear term (0 when absent).
    pub inv_alpha_ne: f64,
    /// Firm had zero empirical out-strength; x0 is the sentinel 1.
    pub zero_output: bool,
}

impl GlpfParams {
    pub fn essential_products(&self) -> impl Iterator<Item = SectorId> + '_ {
        self.essential.iter().map(|&(p, _, _)| p)
    }

    pub fn non_essential_products(&self) -> impl Iterator<Item = SectorId> + '_ {
        self.non_essential.iter().map(|&(p, _)| p)
    }
}

/// Immutable calibrated model shared read-only by cascade workers.
#[derive(Clone, Debug)]
pub struct ProductionModel {
    pub gamma_ne: f64,
    firms: Vec<GlpfParams>,
    /// Empirical out-strengths frozen at calibration.
    s_out0: Vec<Weight>,
    total_s_out0: f64,
}

impl ProductionModel {
    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn params(&self, firm: FirmId) -> &GlpfParams {
        &self.firms[firm.index()]
    }

    pub fn s_out0(&self, firm: FirmId) -> Weight {
        self.s_out0[firm.index()]
    }

    pub fn s_out0_f64(&self, firm: FirmId) -> f64 {
        self.s_out0[firm.index()].to_f64()
    }

    pub fn total_s_out0(&self) -> f64 {
        self.total_s_out0
    }

    /// Fraction of total empirical production owned by `firm` (ESRI weight).
    pub fn production_share(&self, firm: FirmId) -> f64 {
        if self.total_s_out0 > 0.0 {
            self.s_out0_f64(firm) / self.total_s_out0
        } else {
            0.0
        }
    }
}

/// Splits a firm's input products into essential and non-essential sets;
/// irrelevant inputs are dropped and never constrain production.
pub fn classify_inputs(
    net: &ScNetwork,
    ess: &EssentialityMatrix,
    firm: FirmId,
) -> (BTreeSet<SectorId>, BTreeSet<SectorId>) {
    let buyer_nace2 = net.sector_code(net.firm(firm).sector).nace2().to_string();
    let mut es = BTreeSet::new();
    let mut ne = BTreeSet::new();
    for &product in net.firm(firm).in_strength0_by_product.keys() {
        let sup_nace2 = net.sector_code(product).nace2();
        match ess.lookup(sup_nace2, &buyer_nace2) {
            Essentiality::Essential => {
                es.insert(product);
            }
            Essentiality::NonEssential => {
                ne.insert(product);
            }
            Essentiality::Irrelevant => {}
        }
    }
    (es, ne)
}

/// Calibrates every firm's GLPF on its empirically observed inputs.
///
/// `gamma_ne` ∈ [0,1] is the maximum fractional production loss from losing
/// all non-essential inputs: `beta_bar = x0·(1−gamma_ne)` and the linear
/// coefficient is chosen so full inputs reproduce `x0` exactly.
pub fn calibrate(net: &ScNetwork, ess: &EssentialityMatrix, gamma_ne: f64) -> Result<ProductionModel> {
    if !(0.0..=1.0).contains(&gamma_ne) || !gamma_ne.is_finite() {
        return Err(Error::Config(format!(
            "gamma_ne must be in [0,1], got {gamma_ne}"
        )));
    }
    let mut firms = Vec::with_capacity(net.n_firms());
    let mut s_out0 = Vec::with_capacity(net.n_firms());
    let mut total = 0.0;
    for firm in net.firms() {
        let (es, ne) = classify_inputs(net, ess, firm.id);
        let zero_output = firm.out_strength0.is_zero();
        let x0 = if zero_output {
            1.0
        } else {
            firm.out_strength0.to_f64()
        };
        let inputs = &firm.in_strength0_by_product;
        let essential: Vec<(SectorId, f64, f64)> = es
            .iter()
            .map(|&p| {
                let pi0 = inputs[&p].to_f64();
                (p, pi0 / x0, pi0)
            })
            .collect();
        let non_essential: Vec<(SectorId, f64)> =
            ne.iter().map(|&p| (p, inputs[&p].to_f64())).collect();
        let ne_sum0: f64 = non_essential.iter().map(|&(_, pi0)| pi0).sum();
        let (beta_bar, inv_alpha_ne) = if non_essential.is_empty() || gamma_ne == 0.0 {
            // linear term absent / never binding
            (x0, 0.0)
        } else {
            (x0 * (1.0 - gamma_ne), gamma_ne * x0 / ne_sum0)
        };
        firms.push(GlpfParams {
            x0,
            essential,
            non_essential,
            ne_sum0,
            beta_bar,
            inv_alpha_ne,
            zero_output,
        });
        s_out0.push(firm.out_strength0);
        total += firm.out_strength0.to_f64();
    }
    Ok(ProductionModel {
        gamma_ne,
        firms,
        s_out0,
        total_s_out0: total,
    })
}

/// Evaluates the GLPF for delivered input amounts (absolute units). Missing
/// products count as zero. The result is clamped to [0, x0].
pub fn evaluate_glpf(params: &GlpfParams, delivered: &BTreeMap<SectorId, f64>) -> f64 {
    let mut out = params.x0;
    for &(product, alpha, _) in &params.essential {
        let d = delivered.get(&product).copied().unwrap_or(0.0);
        out = out.min(d / alpha);
    }
    if !params.non_essential.is_empty() && params.inv_alpha_ne > 0.0 {
        let ne_del: f64 = params
            .non_essential
            .iter()
            .map(|&(p, _)| delivered.get(&p).copied().unwrap_or(0.0))
            .sum();
        out = out.min(params.beta_bar + params.inv_alpha_ne * ne_del);
    }
    out.clamp(0.0, params.x0)
}

/// Delivered amounts equal to the calibration inputs Π(0).
pub fn full_inputs(params: &GlpfParams) -> BTreeMap<SectorId, f64> {
    let mut m = BTreeMap::new();
    for &(p, _, pi0) in &params.essential {
        m.insert(p, pi0);
    }
    for &(p, pi0) in &params.non_essential {
        m.insert(p, pi0);
    }
    m
}
