use serde::{Deserialize, Serialize};

use crate::domain::{AssayMethod, Budget, CostModel, PlotParameters, PrecisionTarget, StockGeometry};
use crate::error::{Error, Result};
use crate::simulator::SimulationSettings;

/// Precision target as written in a config: exactly one of the two keys.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_se: Option<f64>,
}

impl PrecisionSpec {
    pub fn target(&self) -> Result<PrecisionTarget> {
        match (self.max_variance, self.max_se) {
            (Some(v), None) => PrecisionTarget::from_variance(v),
            (None, Some(se)) => PrecisionTarget::from_se(se),
            _ => Err(Error::validation("", "give exactly one of max_variance and max_se")),
        }
    }
}

/// On-disk layout of a study config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget: Option<f64>,
    plot: PlotParameters,
    costs: CostModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    precision: Option<PrecisionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometry: Option<StockGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulation: Option<SimulationSettings>,
    methods: Vec<AssayMethod>,
}

/// A validated study: plot, candidate methods, costs and the optional
/// problems to solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub plot: PlotParameters,
    pub methods: Vec<AssayMethod>,
    pub costs: CostModel,
    pub budget: Option<Budget>,
    pub precision: Option<PrecisionTarget>,
    pub geometry: Option<StockGeometry>,
    pub simulation: Option<SimulationSettings>,
}

impl StudyConfig {
    pub fn validate(self) -> Result<Self> {
        let plot = self.plot.validate().map_err(|e| e.at("plot"))?;
        let costs = self.costs.validate().map_err(|e| e.at("costs"))?;
        if self.methods.is_empty() {
            return Err(Error::validation("methods", "at least one assay method is required"));
        }
        let mut methods = Vec::with_capacity(self.methods.len());
        for (i, m) in self.methods.into_iter().enumerate() {
            let m = m.validate().map_err(|e| e.at(&format!("methods[{i}]")))?;
            if methods.iter().any(|o: &AssayMethod| o.name.eq_ignore_ascii_case(&m.name)) {
                return Err(Error::validation(format!("methods[{i}].name"), format!("duplicate method {:?}", m.name)));
            }
            methods.push(m);
        }
        if let Some(b) = &self.budget {
            Budget::new(b.total)?;
            b.check_against(&costs)?;
        }
        if let Some(p) = &self.precision {
            PrecisionTarget::from_variance(p.max_variance).map_err(|e| e.at("precision"))?;
        }
        let geometry = self
            .geometry
            .map(|g| g.validate().map_err(|e| e.at("geometry")))
            .transpose()?;
        if let Some(s) = &self.simulation {
            s.validate().map_err(|e| e.at("simulation"))?;
        }
        Ok(StudyConfig {
            plot,
            methods,
            costs,
            geometry,
            ..self
        })
    }

    /// Method by case-insensitive name.
    pub fn method(&self, name: &str) -> Result<&AssayMethod> {
        self.methods.iter().find(|m| m.name.eq_ignore_ascii_case(name)).ok_or_else(|| {
            let known: Vec<&str> = self.methods.iter().map(|m| m.name.as_str()).collect();
            Error::validation("method", format!("unknown method {name:?}; config has {}", known.join(", ")))
        })
    }

    pub fn to_toml(&self) -> String {
        let file = ConfigFile {
            plot: self.plot.clone(),
            costs: self.costs,
            budget: self.budget.map(|b| b.total),
            precision: self.precision.map(|p| PrecisionSpec {
                max_variance: Some(p.max_variance),
                max_se: None,
            }),
            geometry: self.geometry,
            simulation: self.simulation.clone(),
            methods: self.methods.clone(),
        };
        toml::to_string(&file).expect("config serializes")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a TOML study config. Unknown keys are rejected.
pub fn parse_config(bytes: &[u8], source: &str) -> Result<StudyConfig> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(source, None, format!("not valid UTF-8 (byte {})", e.valid_up_to())))?;
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        Error::parse(source, line, e.message().trim().to_string())
    })?;
    let budget = file.budget.map(|b| Budget::new(b).map_err(|e| e.at("budget"))).transpose()?;
    let precision = file
        .precision
        .map(|p| p.target().map_err(|e| e.at("precision")))
        .transpose()?;
    StudyConfig {
        plot: file.plot,
        methods: file.methods,
        costs: file.costs,
        budget,
        precision,
        geometry: file.geometry,
        simulation: file.simulation,
    }
    .validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const TOPSOIL_CONFIG: &str = r#"
budget = 1000

[plot]
mu = 3.57
sigma_p = 0.68
label = "topsoil"

[costs]
cost_fixed = 200
cost_core = 5

[[methods]]
name = "DC-EA"
sigma_delta = 0.02
cost_prep = 11
cost_assay = 15

[[methods]]
name = "LOI"
sigma_delta = 0.11
cost_prep = 8
cost_assay = 1.25

[[methods]]
name = "MIRS"
sigma_delta = 0.05
cost_prep = 9
cost_assay = 1.30
"#;

    #[test]
    fn reference_config() {
        let cfg = parse_config(TOPSOIL_CONFIG.as_bytes(), "t.toml").unwrap();
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.costs.cost_fixed, 200.0);
        assert_eq!(cfg.budget.unwrap().total, 1000.0);
        assert_eq!(cfg.method("loi").unwrap().cost_per_assay(), 9.25);
        assert!(cfg.method("NIR").is_err());
    }

    #[test]
    fn missing_methods_rejected() {
        let text = "[plot]\nmu = 1\nsigma_p = 0.1\n[costs]\ncost_fixed = 0\ncost_core = 1\n";
        let err = parse_config(text.as_bytes(), "t.toml").unwrap_err();
        assert!(err.to_string().contains("methods"), "{err}");
        let empty = format!("methods = []\n{text}");
        assert_eq!(parse_config(empty.as_bytes(), "t.toml").unwrap_err().field_path(), Some("methods"));
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = TOPSOIL_CONFIG.replace("sigma_p = 0.68", "sigma_p = 0.68\nsigmap = 1");
        match parse_config(text.as_bytes(), "t.toml").unwrap_err() {
            Error::Parse { row, message, .. } => {
                assert!(message.contains("sigmap"), "{message}");
                assert_eq!(row, Some(7));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn budget_and_precision_together() {
        let text = format!("{TOPSOIL_CONFIG}\n[precision]\nmax_se = 0.1\n");
        let cfg = parse_config(text.as_bytes(), "t.toml").unwrap();
        assert!(cfg.budget.is_some());
        assert!((cfg.precision.unwrap().max_variance - 0.01).abs() < 1e-15);
        let both = format!("{TOPSOIL_CONFIG}\n[precision]\nmax_se = 0.1\nmax_variance = 0.01\n");
        assert_eq!(parse_config(both.as_bytes(), "t.toml").unwrap_err().field_path(), Some("precision"));
    }

    #[test]
    fn nested_validation_paths() {
        let text = TOPSOIL_CONFIG.replace("sigma_delta = 0.11", "sigma_delta = -0.11");
        assert_eq!(
            parse_config(text.as_bytes(), "t.toml").unwrap_err().field_path(),
            Some("methods[1].sigma_delta")
        );
        let text = TOPSOIL_CONFIG.replace("budget = 1000", "budget = 150");
        assert_eq!(parse_config(text.as_bytes(), "t.toml").unwrap_err().field_path(), Some("budget"));
        let text = format!("{TOPSOIL_CONFIG}\n[simulation]\nn = 10\nk = 3\n");
        assert_eq!(parse_config(text.as_bytes(), "t.toml").unwrap_err().field_path(), Some("simulation.k"));
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{TOPSOIL_CONFIG}\n[precision]\nmax_se = 0.1\n[geometry]\ndepth_m = 0.3\narea_m2 = 4096\nbulk_density = 1.2\n[simulation]\nn = 30\nk = 6\nreplications = 500\n"
        );
        let cfg = parse_config(text.as_bytes(), "t.toml").unwrap();
        let again = parse_config(cfg.to_toml().as_bytes(), "t2.toml").unwrap();
        assert_eq!(cfg, again);
    }

    proptest! {
        #[test]
        fn config_parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let _ = parse_config(&bytes, "fuzz");
        }
    }
}
