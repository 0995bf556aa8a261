//! Reference inputs from a California rangeland survey: two depth profiles,
//! three assay methods, a fixed cost of 200 and three per-core sampling
//! costs.

use crate::domain::{AssayMethod, CostModel, PlotParameters};

pub const COST_FIXED: f64 = 200.0;
pub const CORE_COSTS: [f64; 3] = [5.0, 20.0, 40.0];

/// DC-EA error shared by both profiles, estimated from duplicate assays.
pub const SIGMA_DELTA_DC_EA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 0-10 cm
    Topsoil,
    /// 50-100 cm
    DeepSoil,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::Topsoil, Profile::DeepSoil];

    pub fn name(self) -> &'static str {
        match self {
            Profile::Topsoil => "topsoil",
            Profile::DeepSoil => "deep",
        }
    }

    pub fn from_name(name: &str) -> Option<Profile> {
        match name {
            "topsoil" | "top" => Some(Profile::Topsoil),
            "deep" | "deepsoil" | "deep-soil" => Some(Profile::DeepSoil),
            _ => None,
        }
    }

    pub fn plot(self) -> PlotParameters {
        let (mu, sigma_p) = match self {
            Profile::Topsoil => (3.57, 0.68),
            Profile::DeepSoil => (0.48, 0.12),
        };
        PlotParameters {
            mu,
            sigma_p,
            label: self.name().to_string(),
        }
    }

    /// DC-EA, LOI and MIRS, in that order.
    pub fn methods(self) -> Vec<AssayMethod> {
        let (loi, mirs) = match self {
            Profile::Topsoil => (0.11, 0.05),
            Profile::DeepSoil => (0.67, 0.25),
        };
        vec![
            AssayMethod {
                name: "DC-EA".into(),
                sigma_delta: SIGMA_DELTA_DC_EA,
                cost_prep: 11.0,
                cost_assay: 15.0,
            },
            AssayMethod {
                name: "LOI".into(),
                sigma_delta: loi,
                cost_prep: 8.0,
                cost_assay: 1.25,
            },
            AssayMethod {
                name: "MIRS".into(),
                sigma_delta: mirs,
                cost_prep: 9.0,
                cost_assay: 1.30,
            },
        ]
    }

    pub fn method(self, name: &str) -> Option<AssayMethod> {
        self.methods()
            .into_iter()
            .find(|m| m.name.eq_ignore_ascii_case(name))
    }
}

pub fn costs(cost_core: f64) -> CostModel {
    CostModel {
        cost_fixed: COST_FIXED,
        cost_core,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combined_method_costs() {
        let costs: Vec<f64> = Profile::Topsoil
            .methods()
            .iter()
            .map(|m| m.cost_per_assay())
            .collect();
        assert_eq!(costs, vec![26.0, 9.25, 10.30]);
    }

    #[test]
    fn presets_validate() {
        for p in Profile::ALL {
            p.plot().validate().unwrap();
            for m in p.methods() {
                m.validate().unwrap();
            }
        }
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(Profile::DeepSoil.method("loi").unwrap().sigma_delta, 0.67);
        assert!(Profile::Topsoil.method("XRF").is_none());
    }
}
