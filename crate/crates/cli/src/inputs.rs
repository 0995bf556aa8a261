use std::path::{Path, PathBuf};

use clap::Args;
use soc_core::io::{parse_config, StudyConfig};
use soc_core::presets::{self, Profile};
use soc_core::service::ProfileInput;
use soc_core::{AssayMethod, CostModel, Error, PlotParameters, Result};

#[derive(Args)]
pub(crate) struct StudyArgs {
    /// Study config (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in profile: topsoil or deep.
    #[arg(long)]
    preset: Option<String>,
    /// Mean concentration, %SOC.
    #[arg(long)]
    mu: Option<f64>,
    /// Plot heterogeneity, %SOC.
    #[arg(long)]
    sigma_p: Option<f64>,
    #[arg(long)]
    cost_fixed: Option<f64>,
    #[arg(long)]
    cost_core: Option<f64>,
}

#[derive(Args)]
pub(crate) struct MethodArgs {
    /// Method name from the config or preset.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    sigma_delta: Option<f64>,
    #[arg(long)]
    cost_prep: Option<f64>,
    #[arg(long)]
    cost_assay: Option<f64>,
}

pub(crate) struct Study {
    pub plot: PlotParameters,
    pub costs: CostModel,
    pub methods: Vec<AssayMethod>,
    pub config: Option<StudyConfig>,
}

pub(crate) struct PlotStudy {
    pub plot: PlotParameters,
    pub methods: Vec<AssayMethod>,
    pub config: Option<StudyConfig>,
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::parse(path.display().to_string(), None, format!("cannot read file: {e}")))
}

pub(crate) fn load_config(path: &Path) -> Result<StudyConfig> {
    parse_config(&read_file(path)?, &path.display().to_string())
}

pub(crate) fn profile_from_config(c: StudyConfig, index: usize) -> ProfileInput {
    let name = if c.plot.label.is_empty() {
        format!("profile{}", index + 1)
    } else {
        c.plot.label.clone()
    };
    ProfileInput {
        name,
        cost_fixed: c.costs.cost_fixed,
        plot: c.plot,
        methods: c.methods,
    }
}

fn preset(name: &str) -> Result<Profile> {
    Profile::from_name(name).ok_or_else(|| Error::validation("preset", format!("unknown preset {name:?}; use topsoil or deep")))
}

fn missing(flag: &str) -> Error {
    Error::validation(flag.replace('-', "_"), format!("missing --{flag}"))
}

pub(crate) fn find_method(pool: &[AssayMethod], name: &str, field: &str) -> Result<AssayMethod> {
    pool.iter().find(|m| m.name.eq_ignore_ascii_case(name)).cloned().ok_or_else(|| {
        let known: Vec<&str> = pool.iter().map(|m| m.name.as_str()).collect();
        let hint = if known.is_empty() {
            "no methods configured; give --sigma-delta, --cost-prep and --cost-assay".to_string()
        } else {
            format!("available: {}", known.join(", "))
        };
        Error::validation(field, format!("unknown method {name:?}; {hint}"))
    })
}

impl StudyArgs {
    pub fn resolve_plot_only(&self) -> Result<PlotStudy> {
        let config = self.config.as_deref().map(load_config).transpose()?;
        let (mut plot, methods) = match (&config, &self.preset) {
            (Some(c), _) => (c.plot.clone(), c.methods.clone()),
            (None, Some(p)) => {
                let p = preset(p)?;
                (p.plot(), p.methods())
            }
            (None, None) => (
                PlotParameters {
                    mu: self.mu.ok_or_else(|| missing("mu"))?,
                    sigma_p: self.sigma_p.ok_or_else(|| missing("sigma-p"))?,
                    label: String::new(),
                },
                Vec::new(),
            ),
        };
        if let Some(mu) = self.mu {
            plot.mu = mu;
        }
        if let Some(sp) = self.sigma_p {
            plot.sigma_p = sp;
        }
        Ok(PlotStudy { plot, methods, config })
    }

    pub fn resolve(&self) -> Result<Study> {
        let PlotStudy { plot, methods, config } = self.resolve_plot_only()?;
        let base = match (&config, &self.preset) {
            (Some(c), _) => Some(c.costs),
            (None, Some(_)) => Some(CostModel {
                cost_fixed: presets::COST_FIXED,
                cost_core: self.cost_core.ok_or_else(|| {
                    Error::validation("cost_core", "--preset needs --cost-core (core costs vary by site)")
                })?,
            }),
            (None, None) => None,
        };
        let costs = CostModel {
            cost_fixed: self
                .cost_fixed
                .or(base.map(|c| c.cost_fixed))
                .ok_or_else(|| missing("cost-fixed"))?,
            cost_core: self
                .cost_core
                .or(base.map(|c| c.cost_core))
                .ok_or_else(|| missing("cost-core"))?,
        };
        Ok(Study {
            plot,
            costs,
            methods,
            config,
        })
    }
}

impl MethodArgs {
    pub fn is_empty(&self) -> bool {
        self.method.is_none() && self.sigma_delta.is_none() && self.cost_prep.is_none() && self.cost_assay.is_none()
    }

    /// A named method from `pool`, the only one in it, or one built from
    /// the flags. Individual flags override the pooled values.
    pub fn select(&self, pool: &[AssayMethod]) -> Result<AssayMethod> {
        let complete = self.sigma_delta.is_some() && self.cost_prep.is_some() && self.cost_assay.is_some();
        let mut m = match &self.method {
            Some(name) if complete && !pool.iter().any(|m| m.name.eq_ignore_ascii_case(name)) => custom(name),
            Some(name) => find_method(pool, name, "method")?,
            None if complete => custom("custom"),
            None if pool.len() == 1 => pool[0].clone(),
            None if pool.is_empty() => {
                return Err(Error::validation(
                    "method",
                    "missing --method, or --sigma-delta with --cost-prep and --cost-assay",
                ))
            }
            None => {
                let known: Vec<&str> = pool.iter().map(|m| m.name.as_str()).collect();
                return Err(Error::validation("method", format!("choose one with --method: {}", known.join(", "))));
            }
        };
        if let Some(v) = self.sigma_delta {
            m.sigma_delta = v;
        }
        if let Some(v) = self.cost_prep {
            m.cost_prep = v;
        }
        if let Some(v) = self.cost_assay {
            m.cost_assay = v;
        }
        Ok(m)
    }
}

fn custom(name: &str) -> AssayMethod {
    AssayMethod {
        name: name.to_string(),
        sigma_delta: 0.0,
        cost_prep: 0.0,
        cost_assay: 0.0,
    }
}
