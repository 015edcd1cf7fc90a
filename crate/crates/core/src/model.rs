//! Application and infrastructure model.
//!
//! A [`System`] is the validated, canonical form of an application DAG plus
//! the devices, registries and bandwidth tables it runs on. All ids are
//! sorted lexicographically during validation so that every index derived
//! from a `System` (device index, registry index, dataflow order) is stable
//! across runs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Megabytes per gigabyte. Image sizes are in GB, payloads and bandwidths in MB.
pub const MB_PER_GB: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dataflow graph contains a cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("dataflow {from} -> {to} references unknown microservice `{missing}`")]
    DanglingEdge {
        from: String,
        to: String,
        missing: String,
    },
    #[error("links.{table}: no bandwidth entry for {from} -> {to}")]
    MissingLink {
        table: &'static str,
        from: String,
        to: String,
    },
    #[error("{path} must be positive, got {value}")]
    NonPositiveCapacity { path: String, value: f64 },
    #[error("{path}: {reason}")]
    InvalidValue { path: String, reason: String },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("duplicate dataflow {from} -> {to}")]
    DuplicateDataflow { from: String, to: String },
    #[error("dataflow {0} -> {0} is a self-loop")]
    SelfLoop(String),
    #[error("{path} references unknown {kind} `{id}`")]
    UnknownId {
        path: String,
        kind: &'static str,
        id: String,
    },
    #[error("microservice `{0}` fits on no device")]
    NoFeasibleStrategy(String),
}

/// Minimum resources a microservice needs on its host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirements {
    pub cores: u32,
    /// Processing load in millions of instructions.
    pub cpu_load_mi: f64,
    pub mem_gb: f64,
    pub stor_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microservice {
    pub id: String,
    pub image_size_gb: f64,
    pub req: Requirements,
    /// Source stubs may carry a zero processing load.
    pub source: bool,
    /// Fraction of the host's active power drawn while this microservice runs.
    pub utilization: f64,
    /// Payload (MB) fetched from outside the application before processing,
    /// e.g. a camera stream or an object-store bucket.
    pub ingress_mb: f64,
}

impl Microservice {
    /// Microservice with full utilization and no external ingress.
    pub fn new(id: impl Into<String>, image_size_gb: f64, req: Requirements) -> Self {
        Self {
            id: id.into(),
            image_size_gb,
            req,
            source: false,
            utilization: 1.0,
            ingress_mb: 0.0,
        }
    }

    /// Storage the microservice occupies on its host: image plus working space.
    pub fn storage_footprint_gb(&self) -> f64 {
        self.image_size_gb + self.req.stor_gb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataflow {
    pub upstream: String,
    pub downstream: String,
    pub size_mb: f64,
}

impl Dataflow {
    pub fn new(upstream: impl Into<String>, downstream: impl Into<String>, size_mb: f64) -> Self {
        Self {
            upstream: upstream.into(),
            downstream: downstream.into(),
            size_mb,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Application {
    pub microservices: Vec<Microservice>,
    pub dataflows: Vec<Dataflow>,
}

impl Application {
    pub fn microservice(&self, id: &str) -> Option<&Microservice> {
        self.microservices.iter().find(|m| m.id == id)
    }

    /// Dataflows terminating at `id`, in stored order.
    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Dataflow> + 'a {
        self.dataflows.iter().filter(move |d| d.downstream == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: String,
    pub cores: u32,
    /// Processing speed in MI/s.
    pub cpu_speed_mips: f64,
    pub mem_gb: f64,
    pub stor_gb: f64,
    pub active_power_w: f64,
    pub static_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Registry {
    pub id: String,
}

impl Registry {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into() }
    }
}

/// Bandwidths in MB/s. Intra-device transfers are free and have no entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkTable {
    /// `(from device, to device)`.
    pub device_bw: BTreeMap<(String, String), f64>,
    /// `(registry, device)`.
    pub registry_bw: BTreeMap<(String, String), f64>,
    /// External ingress bandwidth per device; only required when some
    /// microservice has a non-zero `ingress_mb`.
    pub ingress_bw: BTreeMap<String, f64>,
}

impl LinkTable {
    pub fn device_bw(&self, from: &str, to: &str) -> Option<f64> {
        self.device_bw
            .get(&(from.to_owned(), to.to_owned()))
            .copied()
    }

    pub fn registry_bw(&self, registry: &str, device: &str) -> Option<f64> {
        self.registry_bw
            .get(&(registry.to_owned(), device.to_owned()))
            .copied()
    }

    pub fn ingress_bw(&self, device: &str) -> Option<f64> {
        self.ingress_bw.get(device).copied()
    }

    pub fn set_device_bw(&mut self, from: &str, to: &str, mb_per_s: f64) {
        self.device_bw
            .insert((from.to_owned(), to.to_owned()), mb_per_s);
    }

    pub fn set_registry_bw(&mut self, registry: &str, device: &str, mb_per_s: f64) {
        self.registry_bw
            .insert((registry.to_owned(), device.to_owned()), mb_per_s);
    }

    /// Fill every inter-device pair (both directions) with one bandwidth.
    pub fn uniform_devices(&mut self, devices: &[Device], mb_per_s: f64) {
        for k in devices {
            for j in devices {
                if k.id != j.id {
                    self.set_device_bw(&k.id, &j.id, mb_per_s);
                }
            }
        }
    }
}

/// A validated scenario in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    application: Application,
    devices: Vec<Device>,
    registries: Vec<Registry>,
    links: LinkTable,
    ms_index: HashMap<String, usize>,
    dev_index: HashMap<String, usize>,
    reg_index: HashMap<String, usize>,
    /// Dataflow indices per microservice index, in canonical dataflow order.
    incoming: Vec<Vec<usize>>,
    /// Microservice indices in topological order.
    topo: Vec<usize>,
}

impl System {
    pub fn application(&self) -> &Application {
        &self.application
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn registries(&self) -> &[Registry] {
        &self.registries
    }

    pub fn links(&self) -> &LinkTable {
        &self.links
    }

    pub fn microservices(&self) -> &[Microservice] {
        &self.application.microservices
    }

    pub fn microservice_index(&self, id: &str) -> Option<usize> {
        self.ms_index.get(id).copied()
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.dev_index.get(id).copied()
    }

    pub fn registry_index(&self, id: &str) -> Option<usize> {
        self.reg_index.get(id).copied()
    }

    pub fn microservice(&self, id: &str) -> Option<&Microservice> {
        self.microservice_index(id)
            .map(|i| &self.application.microservices[i])
    }

    pub fn device(&self, id: &str) -> Option<&Device> {
        self.device_index(id).map(|i| &self.devices[i])
    }

    /// Indices into `application().dataflows` of flows entering microservice `ms`.
    pub fn incoming_indices(&self, ms: usize) -> &[usize] {
        &self.incoming[ms]
    }

    /// Microservice indices in topological order.
    pub fn topo_indices(&self) -> &[usize] {
        &self.topo
    }

    pub fn topo_order(&self) -> Vec<String> {
        self.topo
            .iter()
            .map(|&i| self.application.microservices[i].id.clone())
            .collect()
    }

    /// Decompose back into the raw parts accepted by [`validate`].
    pub fn into_parts(self) -> (Application, Vec<Device>, Vec<Registry>, LinkTable) {
        (self.application, self.devices, self.registries, self.links)
    }

    pub fn parts(&self) -> (Application, Vec<Device>, Vec<Registry>, LinkTable) {
        self.clone().into_parts()
    }

    /// Same system with every device's power coefficients multiplied by `factor`.
    pub fn with_scaled_power(&self, factor: f64) -> Result<System, ModelError> {
        let (app, mut devices, regs, links) = self.parts();
        for d in &mut devices {
            d.active_power_w *= factor;
            d.static_power_w *= factor;
        }
        validate(app, devices, regs, links)
    }
}

fn check_positive(path: impl FnOnce() -> String, value: f64) -> Result<(), ModelError> {
    if !value.is_finite() {
        return Err(ModelError::InvalidValue {
            path: path(),
            reason: format!("must be finite, got {value}"),
        });
    }
    if value <= 0.0 {
        return Err(ModelError::NonPositiveCapacity {
            path: path(),
            value,
        });
    }
    Ok(())
}

fn check_non_negative(path: impl FnOnce() -> String, value: f64) -> Result<(), ModelError> {
    if !value.is_finite() || value < 0.0 {
        return Err(ModelError::InvalidValue {
            path: path(),
            reason: format!("must be finite and >= 0, got {value}"),
        });
    }
    Ok(())
}

fn index_ids<'a, I>(kind: &'static str, ids: I) -> Result<HashMap<String, usize>, ModelError>
where
    I: Iterator<Item = &'a str>,
{
    let mut out = HashMap::new();
    for (i, id) in ids.enumerate() {
        if out.insert(id.to_owned(), i).is_some() {
            return Err(ModelError::DuplicateId {
                kind,
                id: id.to_owned(),
            });
        }
    }
    Ok(out)
}

fn validate_microservice(m: &Microservice) -> Result<(), ModelError> {
    let p = |field: &str| format!("application.microservices[{}].{field}", m.id);
    check_positive(|| p("image_size_gb"), m.image_size_gb)?;
    if m.req.cores == 0 {
        return Err(ModelError::NonPositiveCapacity {
            path: p("cores"),
            value: 0.0,
        });
    }
    if m.source {
        check_non_negative(|| p("cpu_load_mi"), m.req.cpu_load_mi)?;
    } else {
        check_positive(|| p("cpu_load_mi"), m.req.cpu_load_mi)?;
    }
    check_positive(|| p("mem_gb"), m.req.mem_gb)?;
    check_positive(|| p("stor_gb"), m.req.stor_gb)?;
    check_positive(|| p("utilization"), m.utilization)?;
    if m.utilization > 1.0 {
        return Err(ModelError::InvalidValue {
            path: p("utilization"),
            reason: format!("must be in (0, 1], got {}", m.utilization),
        });
    }
    check_non_negative(|| p("ingress_mb"), m.ingress_mb)
}

fn validate_device(d: &Device) -> Result<(), ModelError> {
    let p = |field: &str| format!("devices[{}].{field}", d.id);
    if d.cores == 0 {
        return Err(ModelError::NonPositiveCapacity {
            path: p("cores"),
            value: 0.0,
        });
    }
    check_positive(|| p("cpu_speed_mips"), d.cpu_speed_mips)?;
    check_positive(|| p("mem_gb"), d.mem_gb)?;
    check_positive(|| p("stor_gb"), d.stor_gb)?;
    check_positive(|| p("active_power_w"), d.active_power_w)?;
    check_non_negative(|| p("static_power_w"), d.static_power_w)
}

/// Confirm every invariant and return the canonical [`System`], or the first
/// violation found.
pub fn validate(
    mut application: Application,
    mut devices: Vec<Device>,
    mut registries: Vec<Registry>,
    links: LinkTable,
) -> Result<System, ModelError> {
    application.microservices.sort_by(|a, b| a.id.cmp(&b.id));
    application
        .dataflows
        .sort_by(|a, b| (&a.upstream, &a.downstream).cmp(&(&b.upstream, &b.downstream)));
    devices.sort_by(|a, b| a.id.cmp(&b.id));
    registries.sort();

    let ms_index = index_ids(
        "microservice",
        application.microservices.iter().map(|m| m.id.as_str()),
    )?;
    let dev_index = index_ids("device", devices.iter().map(|d| d.id.as_str()))?;
    let reg_index = index_ids("registry", registries.iter().map(|r| r.id.as_str()))?;

    for m in &application.microservices {
        validate_microservice(m)?;
    }
    for d in &devices {
        validate_device(d)?;
    }

    let mut seen = BTreeSet::new();
    let mut incoming = vec![Vec::new(); application.microservices.len()];
    for (k, df) in application.dataflows.iter().enumerate() {
        if df.upstream == df.downstream {
            return Err(ModelError::SelfLoop(df.upstream.clone()));
        }
        for end in [&df.upstream, &df.downstream] {
            if !ms_index.contains_key(end) {
                return Err(ModelError::DanglingEdge {
                    from: df.upstream.clone(),
                    to: df.downstream.clone(),
                    missing: end.clone(),
                });
            }
        }
        check_non_negative(
            || {
                format!(
                    "application.dataflows[{}->{}].size_mb",
                    df.upstream, df.downstream
                )
            },
            df.size_mb,
        )?;
        if !seen.insert((df.upstream.as_str(), df.downstream.as_str())) {
            return Err(ModelError::DuplicateDataflow {
                from: df.upstream.clone(),
                to: df.downstream.clone(),
            });
        }
        incoming[ms_index[&df.downstream]].push(k);
    }

    validate_links(
        &links,
        &devices,
        &registries,
        &application,
        &dev_index,
        &reg_index,
    )?;

    let topo_ids = topo_order(&application)?;
    let topo = topo_ids.iter().map(|id| ms_index[id]).collect();

    Ok(System {
        application,
        devices,
        registries,
        links,
        ms_index,
        dev_index,
        reg_index,
        incoming,
        topo,
    })
}

fn validate_links(
    links: &LinkTable,
    devices: &[Device],
    registries: &[Registry],
    app: &Application,
    dev_index: &HashMap<String, usize>,
    reg_index: &HashMap<String, usize>,
) -> Result<(), ModelError> {
    let known_device = |path: &str, id: &str| {
        if dev_index.contains_key(id) {
            Ok(())
        } else {
            Err(ModelError::UnknownId {
                path: path.to_owned(),
                kind: "device",
                id: id.to_owned(),
            })
        }
    };

    for ((k, j), &bw) in &links.device_bw {
        let path = format!("links.device_bw[{k}->{j}]");
        known_device(&path, k)?;
        known_device(&path, j)?;
        check_positive(|| format!("{path}.mb_per_s"), bw)?;
    }
    for ((g, j), &bw) in &links.registry_bw {
        let path = format!("links.registry_bw[{g}->{j}]");
        if !reg_index.contains_key(g) {
            return Err(ModelError::UnknownId {
                path,
                kind: "registry",
                id: g.clone(),
            });
        }
        known_device(&path, j)?;
        check_positive(|| format!("{path}.mb_per_s"), bw)?;
    }
    for (j, &bw) in &links.ingress_bw {
        let path = format!("links.ingress_bw[{j}]");
        known_device(&path, j)?;
        check_positive(|| format!("{path}.mb_per_s"), bw)?;
    }

    for g in registries {
        for d in devices {
            if links.registry_bw(&g.id, &d.id).is_none() {
                return Err(ModelError::MissingLink {
                    table: "registry_bw",
                    from: g.id.clone(),
                    to: d.id.clone(),
                });
            }
        }
    }
    for k in devices {
        for j in devices {
            if k.id != j.id && links.device_bw(&k.id, &j.id).is_none() {
                return Err(ModelError::MissingLink {
                    table: "device_bw",
                    from: k.id.clone(),
                    to: j.id.clone(),
                });
            }
        }
    }
    if let Some(m) = app.microservices.iter().find(|m| m.ingress_mb > 0.0) {
        for d in devices {
            if links.ingress_bw(&d.id).is_none() {
                return Err(ModelError::MissingLink {
                    table: "ingress_bw",
                    from: format!("ingress of {}", m.id),
                    to: d.id.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Topological order: microservices grouped by longest distance from a
/// source, ids ascending within each layer.
pub fn topo_order(app: &Application) -> Result<Vec<String>, ModelError> {
    let ids: Vec<&str> = {
        let mut v: Vec<&str> = app.microservices.iter().map(|m| m.id.as_str()).collect();
        v.sort_unstable();
        v
    };
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ids.len();
    let mut succ = vec![Vec::new(); n];
    let mut pred = vec![Vec::new(); n];
    for df in &app.dataflows {
        let (Some(&u), Some(&v)) = (
            index.get(df.upstream.as_str()),
            index.get(df.downstream.as_str()),
        ) else {
            let missing = if index.contains_key(df.upstream.as_str()) {
                &df.downstream
            } else {
                &df.upstream
            };
            return Err(ModelError::DanglingEdge {
                from: df.upstream.clone(),
                to: df.downstream.clone(),
                missing: missing.clone(),
            });
        };
        succ[u].push(v);
        pred[v].push(u);
    }

    let mut indeg: Vec<usize> = pred.iter().map(Vec::len).collect();
    let mut depth = vec![0usize; n];
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut done = 0;
    while let Some(u) = ready.pop() {
        done += 1;
        for &v in &succ[u] {
            depth[v] = depth[v].max(depth[u] + 1);
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(v);
            }
        }
    }
    if done < n {
        return Err(ModelError::CycleDetected(find_cycle(&ids, &pred, &indeg)));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (depth[i], i));
    Ok(order.into_iter().map(|i| ids[i].to_owned()).collect())
}

/// Walk predecessor links among the nodes Kahn's algorithm could not
/// release until a node repeats.
fn find_cycle(ids: &[&str], pred: &[Vec<usize>], indeg: &[usize]) -> Vec<String> {
    let stuck = |v: usize| indeg[v] > 0;
    let start = (0..ids.len())
        .find(|&v| stuck(v))
        .expect("a stuck node exists");
    let mut path = vec![start];
    let mut pos = HashMap::from([(start, 0usize)]);
    let mut cur = start;
    loop {
        let next = *pred[cur]
            .iter()
            .filter(|&&u| stuck(u))
            .min()
            .expect("stuck nodes have a stuck predecessor");
        if let Some(&at) = pos.get(&next) {
            let mut cycle: Vec<String> = path[at..]
                .iter()
                .rev()
                .map(|&v| ids[v].to_owned())
                .collect();
            cycle.push(cycle[0].clone());
            return cycle;
        }
        pos.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

/// Microservices with at least two incoming dataflows, ascending by id.
pub fn barriers(app: &Application) -> Vec<String> {
    let mut indeg: BTreeMap<&str, usize> = BTreeMap::new();
    for df in &app.dataflows {
        *indeg.entry(df.downstream.as_str()).or_default() += 1;
    }
    indeg
        .into_iter()
        .filter(|&(_, d)| d >= 2)
        .map(|(id, _)| id.to_owned())
        .collect()
}

/// Whether `device` satisfies the per-microservice requirements of `ms`.
pub fn admits(ms: &Microservice, device: &Device) -> bool {
    ms.req.cores <= device.cores
        && ms.req.mem_gb <= device.mem_gb
        && ms.storage_footprint_gb() <= device.stor_gb
}

/// All `(registry id, device id)` pairs that can host `ms`, ordered by
/// registry then device as given.
pub fn feasible_strategies(
    ms: &Microservice,
    devices: &[Device],
    registries: &[Registry],
) -> Result<Vec<(String, String)>, ModelError> {
    let out: Vec<(String, String)> = registries
        .iter()
        .flat_map(|g| {
            devices
                .iter()
                .filter(|d| admits(ms, d))
                .map(move |d| (g.id.clone(), d.id.clone()))
        })
        .collect();
    if out.is_empty() {
        Err(ModelError::NoFeasibleStrategy(ms.id.clone()))
    } else {
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn req(cores: u32, cpu: f64) -> Requirements {
        Requirements {
            cores,
            cpu_load_mi: cpu,
            mem_gb: 1.0,
            stor_gb: 1.0,
        }
    }

    pub(crate) fn device(id: &str, cores: u32, speed: f64) -> Device {
        Device {
            id: id.into(),
            cores,
            cpu_speed_mips: speed,
            mem_gb: 16.0,
            stor_gb: 64.0,
            active_power_w: 10.0,
            static_power_w: 1.0,
        }
    }

    pub(crate) fn full_links(devices: &[Device], registries: &[Registry]) -> LinkTable {
        let mut links = LinkTable::default();
        links.uniform_devices(devices, 50.0);
        for g in registries {
            for d in devices {
                links.set_registry_bw(&g.id, &d.id, 10.0);
            }
        }
        links
    }

    fn app(nodes: &[&str], edges: &[(&str, &str)]) -> Application {
        Application {
            microservices: nodes
                .iter()
                .map(|id| Microservice::new(*id, 0.5, req(1, 100.0)))
                .collect(),
            dataflows: edges
                .iter()
                .map(|(u, v)| Dataflow::new(*u, *v, 10.0))
                .collect(),
        }
    }

    fn text_app() -> Application {
        app(
            &[
                "retrieve",
                "decompress",
                "ha-train",
                "la-train",
                "ha-score",
                "la-score",
            ],
            &[
                ("retrieve", "decompress"),
                ("decompress", "ha-train"),
                ("decompress", "la-train"),
                ("decompress", "ha-score"),
                ("decompress", "la-score"),
                ("ha-train", "ha-score"),
                ("la-train", "la-score"),
            ],
        )
    }

    fn infra() -> (Vec<Device>, Vec<Registry>, LinkTable) {
        let devices = vec![device("medium", 8, 1000.0), device("small", 4, 600.0)];
        let regs = vec![Registry::new("hub"), Registry::new("regional")];
        let links = full_links(&devices, &regs);
        (devices, regs, links)
    }

    #[test]
    fn text_app_validates() {
        let (d, r, l) = infra();
        let sys = validate(text_app(), d, r, l).unwrap();
        assert_eq!(sys.microservices().len(), 6);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let (d, r, l) = infra();
        let err = validate(app(&["a", "b"], &[("a", "b"), ("b", "a")]), d, r, l).unwrap_err();
        match err {
            ModelError::CycleDetected(c) => {
                assert_eq!(c.first(), c.last());
                assert_eq!(c.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_registry_link_is_reported() {
        let (d, r, mut l) = infra();
        l.registry_bw
            .remove(&("hub".to_owned(), "small".to_owned()));
        let err = validate(text_app(), d, r, l).unwrap_err();
        assert_eq!(
            err,
            ModelError::MissingLink {
                table: "registry_bw",
                from: "hub".into(),
                to: "small".into()
            }
        );
    }

    #[test]
    fn dangling_edge_and_self_loop() {
        let (d, r, l) = infra();
        let err = validate(
            app(&["a"], &[("a", "ghost")]),
            d.clone(),
            r.clone(),
            l.clone(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::DanglingEdge { missing, .. } if missing == "ghost"));
        let err = validate(app(&["a"], &[("a", "a")]), d, r, l).unwrap_err();
        assert_eq!(err, ModelError::SelfLoop("a".into()));
    }

    #[test]
    fn non_positive_values_are_rejected() {
        let (mut d, r, l) = infra();
        d[1].cpu_speed_mips = 0.0;
        let err = validate(text_app(), d, r.clone(), l.clone()).unwrap_err();
        assert!(
            matches!(err, ModelError::NonPositiveCapacity { ref path, .. } if path == "devices[small].cpu_speed_mips")
        );

        let (d, _, mut l) = infra();
        l.set_device_bw("medium", "small", -3.0);
        let err = validate(text_app(), d, r, l).unwrap_err();
        assert!(
            matches!(err, ModelError::NonPositiveCapacity { ref path, .. } if path.starts_with("links.device_bw"))
        );
    }

    #[test]
    fn zero_cpu_load_only_for_sources() {
        let (d, r, l) = infra();
        let mut a = app(&["a", "b"], &[("a", "b")]);
        a.microservices[0].req.cpu_load_mi = 0.0;
        assert!(validate(a.clone(), d.clone(), r.clone(), l.clone()).is_err());
        a.microservices[0].source = true;
        assert!(validate(a, d, r, l).is_ok());
    }

    #[test]
    fn ingress_requires_ingress_links() {
        let (d, r, mut l) = infra();
        let mut a = app(&["a"], &[]);
        a.microservices[0].ingress_mb = 5.0;
        let err = validate(a.clone(), d.clone(), r.clone(), l.clone()).unwrap_err();
        assert!(matches!(
            err,
            ModelError::MissingLink {
                table: "ingress_bw",
                ..
            }
        ));
        l.ingress_bw.insert("medium".into(), 5.0);
        l.ingress_bw.insert("small".into(), 5.0);
        assert!(validate(a, d, r, l).is_ok());
    }

    #[test]
    fn duplicate_ids_and_edges() {
        let (d, r, l) = infra();
        let err = validate(app(&["a", "a"], &[]), d.clone(), r.clone(), l.clone()).unwrap_err();
        assert!(matches!(
            err,
            ModelError::DuplicateId {
                kind: "microservice",
                ..
            }
        ));
        let err = validate(app(&["a", "b"], &[("a", "b"), ("a", "b")]), d, r, l).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateDataflow { .. }));
    }

    #[test]
    fn validate_is_idempotent() {
        let (d, r, l) = infra();
        let sys = validate(text_app(), d, r, l).unwrap();
        let (a, d, r, l) = sys.parts();
        assert_eq!(validate(a, d, r, l).unwrap(), sys);
    }

    #[test]
    fn text_topo_order_is_layered() {
        assert_eq!(
            topo_order(&text_app()).unwrap(),
            [
                "retrieve",
                "decompress",
                "ha-train",
                "la-train",
                "ha-score",
                "la-score"
            ]
        );
    }

    #[test]
    fn topo_order_small_cases() {
        assert_eq!(topo_order(&app(&["x"], &[])).unwrap(), ["x"]);
        let diamond = app(
            &["d", "c", "b", "a"],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
        );
        assert_eq!(topo_order(&diamond).unwrap(), ["a", "b", "c", "d"]);
    }

    #[test]
    fn barrier_detection() {
        assert_eq!(barriers(&text_app()), ["ha-score", "la-score"]);
        assert!(barriers(&app(&["a", "b", "c"], &[("a", "b"), ("b", "c")])).is_empty());
        let diamond = app(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
        );
        assert_eq!(barriers(&diamond), ["d"]);
    }

    #[test]
    fn feasible_strategy_filtering() {
        let (d, r, _) = infra();
        let big = Microservice::new("big", 1.0, req(6, 100.0));
        assert_eq!(
            feasible_strategies(&big, &d, &r).unwrap(),
            [
                ("hub".to_owned(), "medium".to_owned()),
                ("regional".to_owned(), "medium".to_owned())
            ]
        );
        let light = Microservice::new("light", 1.0, req(1, 100.0));
        assert_eq!(feasible_strategies(&light, &d, &r).unwrap().len(), 4);

        let mut hungry = Microservice::new("hungry", 1.0, req(1, 100.0));
        hungry.req.mem_gb = 32.0;
        assert_eq!(
            feasible_strategies(&hungry, &d, &r).unwrap_err(),
            ModelError::NoFeasibleStrategy("hungry".into())
        );
    }

    #[test]
    fn storage_check_includes_image() {
        let (mut d, r, _) = infra();
        d[1].stor_gb = 2.0;
        let mut m = Microservice::new("m", 1.5, req(1, 100.0));
        m.req.stor_gb = 1.0;
        let s = feasible_strategies(&m, &d, &r).unwrap();
        assert!(s.iter().all(|(_, dev)| dev == "medium"));
    }
}
