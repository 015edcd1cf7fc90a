use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::cost::CacheMode;
use crate::model::{
    self, Application, Dataflow, Device, LinkTable, Microservice, ModelError, Registry,
    Requirements, System,
};

/// A validated system plus the metadata of the document it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub cache_mode: CacheMode,
    /// Constants chosen during calibration, keyed by a dotted name.
    pub calibration: BTreeMap<String, f64>,
    pub system: System,
}

/// On-disk form of a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub cache_mode: CacheMode,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub calibration: BTreeMap<String, f64>,
    pub devices: Vec<Device>,
    pub registries: Vec<Registry>,
    pub links: LinksDoc,
    pub application: ApplicationDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinksDoc {
    pub device_bw: Vec<DeviceLink>,
    pub registry_bw: Vec<RegistryLink>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ingress_bw: Vec<IngressLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLink {
    pub from: String,
    pub to: String,
    pub mb_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryLink {
    pub registry: String,
    pub device: String,
    pub mb_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngressLink {
    pub device: String,
    pub mb_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationDoc {
    pub microservices: Vec<MicroserviceDoc>,
    pub dataflows: Vec<DataflowDoc>,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroserviceDoc {
    pub id: String,
    pub image_size_gb: f64,
    pub cores: u32,
    pub cpu_load_mi: f64,
    pub mem_gb: f64,
    pub stor_gb: f64,
    #[serde(default)]
    pub source: bool,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub utilization: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub ingress_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataflowDoc {
    pub from: String,
    pub to: String,
    pub size_mb: f64,
}

fn duplicate_link(kind: &'static str, id: String) -> ModelError {
    ModelError::DuplicateId { kind, id }
}

impl ScenarioDoc {
    pub fn into_scenario(self) -> Result<Scenario, BenchError> {
        let mut links = LinkTable::default();
        for l in &self.links.device_bw {
            if links.device_bw(&l.from, &l.to).is_some() {
                return Err(
                    duplicate_link("device_bw link", format!("{}->{}", l.from, l.to)).into(),
                );
            }
            links.set_device_bw(&l.from, &l.to, l.mb_per_s);
        }
        for l in &self.links.registry_bw {
            if links.registry_bw(&l.registry, &l.device).is_some() {
                return Err(duplicate_link(
                    "registry_bw link",
                    format!("{}->{}", l.registry, l.device),
                )
                .into());
            }
            links.set_registry_bw(&l.registry, &l.device, l.mb_per_s);
        }
        for l in &self.links.ingress_bw {
            if links
                .ingress_bw
                .insert(l.device.clone(), l.mb_per_s)
                .is_some()
            {
                return Err(duplicate_link("ingress_bw link", l.device.clone()).into());
            }
        }
        let application = Application {
            microservices: self
                .application
                .microservices
                .into_iter()
                .map(|m| Microservice {
                    id: m.id,
                    image_size_gb: m.image_size_gb,
                    req: Requirements {
                        cores: m.cores,
                        cpu_load_mi: m.cpu_load_mi,
                        mem_gb: m.mem_gb,
                        stor_gb: m.stor_gb,
                    },
                    source: m.source,
                    utilization: m.utilization,
                    ingress_mb: m.ingress_mb,
                })
                .collect(),
            dataflows: self
                .application
                .dataflows
                .into_iter()
                .map(|d| Dataflow::new(d.from, d.to, d.size_mb))
                .collect(),
        };
        let system = model::validate(application, self.devices, self.registries, links)?;
        Ok(Scenario {
            name: self.name,
            description: self.description,
            cache_mode: self.cache_mode,
            calibration: self.calibration,
            system,
        })
    }
}

impl Scenario {
    pub fn new(name: impl Into<String>, system: System) -> Self {
        Self {
            name: name.into(),
            description: None,
            cache_mode: CacheMode::Cold,
            calibration: BTreeMap::new(),
            system,
        }
    }

    /// Canonical document: every list sorted by id, links in key order.
    pub fn to_doc(&self) -> ScenarioDoc {
        let system = &self.system;
        let links = system.links();
        let sources: BTreeSet<&str> = system
            .microservices()
            .iter()
            .filter(|m| m.source)
            .map(|m| m.id.as_str())
            .collect();
        ScenarioDoc {
            name: self.name.clone(),
            description: self.description.clone(),
            cache_mode: self.cache_mode,
            calibration: self.calibration.clone(),
            devices: system.devices().to_vec(),
            registries: system.registries().to_vec(),
            links: LinksDoc {
                device_bw: links
                    .device_bw
                    .iter()
                    .map(|((from, to), &mb_per_s)| DeviceLink {
                        from: from.clone(),
                        to: to.clone(),
                        mb_per_s,
                    })
                    .collect(),
                registry_bw: links
                    .registry_bw
                    .iter()
                    .map(|((registry, device), &mb_per_s)| RegistryLink {
                        registry: registry.clone(),
                        device: device.clone(),
                        mb_per_s,
                    })
                    .collect(),
                ingress_bw: links
                    .ingress_bw
                    .iter()
                    .map(|(device, &mb_per_s)| IngressLink {
                        device: device.clone(),
                        mb_per_s,
                    })
                    .collect(),
            },
            application: ApplicationDoc {
                microservices: system
                    .microservices()
                    .iter()
                    .map(|m| MicroserviceDoc {
                        id: m.id.clone(),
                        image_size_gb: m.image_size_gb,
                        cores: m.req.cores,
                        cpu_load_mi: m.req.cpu_load_mi,
                        mem_gb: m.req.mem_gb,
                        stor_gb: m.req.stor_gb,
                        source: sources.contains(m.id.as_str()),
                        utilization: m.utilization,
                        ingress_mb: m.ingress_mb,
                    })
                    .collect(),
                dataflows: system
                    .application()
                    .dataflows
                    .iter()
                    .map(|d| DataflowDoc {
                        from: d.upstream.clone(),
                        to: d.downstream.clone(),
                        size_mb: d.size_mb,
                    })
                    .collect(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("documents serialize");
        s.push('\n');
        s
    }

    pub fn with_system(&self, system: System) -> Self {
        Self {
            system,
            ..self.clone()
        }
    }
}

pub fn load_scenario(document: &str) -> Result<Scenario, BenchError> {
    let doc: ScenarioDoc =
        serde_json::from_str(document).map_err(|e| BenchError::Parse(e.to_string()))?;
    doc.into_scenario()
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}
