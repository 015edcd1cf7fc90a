//! Completion-time and energy evaluation of a placement.
//!
//! For microservice `m` pulled from registry `g` onto device `j`:
//!
//! ```text
//! CT = T_deploy + T_transfer + T_process
//! T_deploy   = image_size_gb * 1000 / bw(g, j)      (0 on cache hit)
//! T_transfer = ingress_mb / ingress_bw(j) + sum over dataflows u -> m of size_mb / bw(sched(u), j)
//! T_process  = cpu_load_mi / cpu_speed_mips(j)
//! E_active   = active_power_w(j) * utilization(m) * CT
//! E_static   = static_power_w(j) * CT
//! ```
//!
//! Incoming transfers are serialized (summed) and charged to the receiver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    self, Dataflow, Device, LinkTable, Microservice, ModelError, System, MB_PER_GB,
};

/// Relative slack allowed when comparing summed storage against capacity.
pub const STORAGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown microservice `{0}`")]
    UnknownMicroservice(String),
    #[error("microservice `{0}` has no device or registry assigned")]
    Unassigned(String),
    #[error("microservice `{ms}` cannot be placed on ({registry}, {device})")]
    InfeasibleAssignment {
        ms: String,
        registry: String,
        device: String,
    },
    #[error("device `{device}` needs {used_gb} GB of storage but has {capacity_gb} GB")]
    StorageExceeded {
        device: String,
        used_gb: f64,
        capacity_gb: f64,
    },
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum CacheMode {
    #[default]
    Cold,
    Warm,
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CacheMode::Cold => "cold",
            CacheMode::Warm => "warm",
        })
    }
}

impl FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cold" => Ok(CacheMode::Cold),
            "warm" => Ok(CacheMode::Warm),
            other => Err(format!("unknown cache mode `{other}` (expected cold|warm)")),
        }
    }
}

/// Image presence on devices during one evaluation pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    pub mode: CacheMode,
    /// `(device id, microservice id)` pairs whose image is already on the device.
    pub present: BTreeSet<(String, String)>,
}

impl CacheState {
    pub fn new(mode: CacheMode) -> Self {
        Self {
            mode,
            present: BTreeSet::new(),
        }
    }

    pub fn holds(&self, device: &str, ms: &str) -> bool {
        self.mode == CacheMode::Warm || self.present.contains(&(device.to_owned(), ms.to_owned()))
    }
}

/// Assignment of every microservice to a device (`sched`) and registry (`regist`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub sched: BTreeMap<String, String>,
    pub regist: BTreeMap<String, String>,
}

impl Placement {
    pub fn assign(&mut self, ms: &str, registry: &str, device: &str) {
        self.sched.insert(ms.to_owned(), device.to_owned());
        self.regist.insert(ms.to_owned(), registry.to_owned());
    }

    /// Every microservice of `system` on `device`, pulled from `registry`.
    pub fn uniform(system: &System, registry: &str, device: &str) -> Self {
        let mut p = Placement::default();
        for m in system.microservices() {
            p.assign(&m.id, registry, device);
        }
        p
    }

    pub fn device_of(&self, ms: &str) -> Result<&str, CostError> {
        self.sched
            .get(ms)
            .map(String::as_str)
            .ok_or_else(|| CostError::Unassigned(ms.to_owned()))
    }

    pub fn registry_of(&self, ms: &str) -> Result<&str, CostError> {
        self.regist
            .get(ms)
            .map(String::as_str)
            .ok_or_else(|| CostError::Unassigned(ms.to_owned()))
    }

    /// Totality, per-microservice feasibility and the joint storage constraint.
    pub fn check(&self, system: &System) -> Result<(), CostError> {
        let mut used: BTreeMap<&str, f64> = BTreeMap::new();
        for m in system.microservices() {
            let dev_id = self.device_of(&m.id)?;
            let reg_id = self.registry_of(&m.id)?;
            let infeasible = || CostError::InfeasibleAssignment {
                ms: m.id.clone(),
                registry: reg_id.to_owned(),
                device: dev_id.to_owned(),
            };
            let device = system.device(dev_id).ok_or_else(infeasible)?;
            if system.registry_index(reg_id).is_none() || !model::admits(m, device) {
                return Err(infeasible());
            }
            *used.entry(dev_id).or_default() += m.storage_footprint_gb();
        }
        for (dev_id, used_gb) in used {
            let capacity_gb = system.device(dev_id).expect("checked above").stor_gb;
            if used_gb > capacity_gb * (1.0 + STORAGE_SLACK) {
                return Err(CostError::StorageExceeded {
                    device: dev_id.to_owned(),
                    used_gb,
                    capacity_gb,
                });
            }
        }
        Ok(())
    }
}

/// Time and energy for one microservice under one placement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub t_deploy_s: f64,
    pub t_transfer_s: f64,
    pub t_process_s: f64,
    pub ct_s: f64,
    pub e_active_j: f64,
    pub e_static_j: f64,
    pub ec_j: f64,
}

impl CostBreakdown {
    pub fn from_times(t_deploy_s: f64, t_transfer_s: f64, t_process_s: f64) -> Self {
        Self {
            t_deploy_s,
            t_transfer_s,
            t_process_s,
            ct_s: t_deploy_s + t_transfer_s + t_process_s,
            ..Self::default()
        }
    }

    /// Fill the energy fields from the host's power draw.
    pub fn with_power(mut self, active_w: f64, static_w: f64) -> Self {
        self.e_active_j = active_w * self.ct_s;
        self.e_static_j = static_w * self.ct_s;
        self.ec_j = self.e_active_j + self.e_static_j;
        self
    }
}

/// Active power (W) drawn by `ms` on `device`.
pub fn active_power_w(ms: &Microservice, device: &Device) -> f64 {
    device.active_power_w * ms.utilization
}

/// Image pull time; cold-mode misses record the image as present.
pub fn deployment_time(
    ms: &Microservice,
    registry: &str,
    device: &str,
    links: &LinkTable,
    cache: &mut CacheState,
) -> Result<f64, CostError> {
    let bw = links
        .registry_bw(registry, device)
        .ok_or_else(|| ModelError::MissingLink {
            table: "registry_bw",
            from: registry.to_owned(),
            to: device.to_owned(),
        })?;
    if cache.holds(device, &ms.id) {
        return Ok(0.0);
    }
    cache.present.insert((device.to_owned(), ms.id.clone()));
    Ok(ms.image_size_gb * MB_PER_GB / bw)
}

pub fn transfer_time(
    df: &Dataflow,
    upstream_device: &str,
    downstream_device: &str,
    links: &LinkTable,
) -> Result<f64, CostError> {
    if upstream_device == downstream_device {
        return Ok(0.0);
    }
    let bw = links
        .device_bw(upstream_device, downstream_device)
        .ok_or_else(|| ModelError::MissingLink {
            table: "device_bw",
            from: upstream_device.to_owned(),
            to: downstream_device.to_owned(),
        })?;
    Ok(df.size_mb / bw)
}

/// Time to fetch the microservice's external ingress payload onto `device`.
pub fn ingress_time(ms: &Microservice, device: &str, links: &LinkTable) -> Result<f64, CostError> {
    if ms.ingress_mb == 0.0 {
        return Ok(0.0);
    }
    let bw = links
        .ingress_bw(device)
        .ok_or_else(|| ModelError::MissingLink {
            table: "ingress_bw",
            from: format!("ingress of {}", ms.id),
            to: device.to_owned(),
        })?;
    Ok(ms.ingress_mb / bw)
}

pub fn processing_time(ms: &Microservice, device: &Device) -> f64 {
    ms.req.cpu_load_mi / device.cpu_speed_mips
}

fn lookup<'a>(system: &'a System, ms_id: &str) -> Result<&'a Microservice, CostError> {
    system
        .microservice(ms_id)
        .ok_or_else(|| CostError::UnknownMicroservice(ms_id.to_owned()))
}

/// Time components of `ms_id`'s completion time; energy fields are zero.
pub fn completion_time(
    system: &System,
    ms_id: &str,
    placement: &Placement,
    cache: &mut CacheState,
) -> Result<CostBreakdown, CostError> {
    let ms = lookup(system, ms_id)?;
    let dev_id = placement.device_of(ms_id)?;
    let reg_id = placement.registry_of(ms_id)?;
    let device = system
        .device(dev_id)
        .ok_or_else(|| CostError::InfeasibleAssignment {
            ms: ms_id.to_owned(),
            registry: reg_id.to_owned(),
            device: dev_id.to_owned(),
        })?;
    let links = system.links();

    let t_deploy = deployment_time(ms, reg_id, dev_id, links, cache)?;
    let mut t_transfer = ingress_time(ms, dev_id, links)?;
    let ms_idx = system.microservice_index(ms_id).expect("looked up above");
    for &k in system.incoming_indices(ms_idx) {
        let df = &system.application().dataflows[k];
        let up_dev = placement.device_of(&df.upstream)?;
        t_transfer += transfer_time(df, up_dev, dev_id, links)?;
    }
    let t_process = processing_time(ms, device);
    Ok(CostBreakdown::from_times(t_deploy, t_transfer, t_process))
}

/// Complete time and energy breakdown of `ms_id`.
pub fn energy(
    system: &System,
    ms_id: &str,
    placement: &Placement,
    cache: &mut CacheState,
) -> Result<CostBreakdown, CostError> {
    let times = completion_time(system, ms_id, placement, cache)?;
    let ms = lookup(system, ms_id)?;
    let device = system
        .device(placement.device_of(ms_id)?)
        .expect("resolved by completion_time");
    Ok(times.with_power(active_power_w(ms, device), device.static_power_w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTotal {
    pub total_j: f64,
    /// Per-microservice breakdown in topological order.
    pub per_microservice: Vec<(String, CostBreakdown)>,
}

/// Sum of per-microservice energy, evaluated in topological order with a
/// fresh cache.
pub fn total_energy(
    system: &System,
    placement: &Placement,
    mode: CacheMode,
) -> Result<EnergyTotal, CostError> {
    let mut cache = CacheState::new(mode);
    let mut total_j = 0.0;
    let mut per_microservice = Vec::with_capacity(system.microservices().len());
    for id in system.topo_order() {
        let b = energy(system, &id, placement, &mut cache)?;
        total_j += b.ec_j;
        per_microservice.push((id, b));
    }
    Ok(EnergyTotal {
        total_j,
        per_microservice,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MakespanMode {
    /// Non-concurrent execution: completion times add up.
    Serial,
    /// Longest chain of completion times through the DAG.
    CriticalPath,
}

pub fn makespan(
    system: &System,
    placement: &Placement,
    mode: CacheMode,
    how: MakespanMode,
) -> Result<f64, CostError> {
    let totals = total_energy(system, placement, mode)?;
    let ct: BTreeMap<&str, f64> = totals
        .per_microservice
        .iter()
        .map(|(id, b)| (id.as_str(), b.ct_s))
        .collect();
    Ok(match how {
        MakespanMode::Serial => totals.per_microservice.iter().map(|(_, b)| b.ct_s).sum(),
        MakespanMode::CriticalPath => {
            let mut finish: BTreeMap<&str, f64> = BTreeMap::new();
            for (id, _) in &totals.per_microservice {
                let ready = system
                    .application()
                    .incoming(id)
                    .map(|df| finish[df.upstream.as_str()])
                    .fold(0.0, f64::max);
                finish.insert(id.as_str(), ready + ct[id.as_str()]);
            }
            finish.values().copied().fold(0.0, f64::max)
        }
    })
}
