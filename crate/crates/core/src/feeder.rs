//! Feeder graph, device parameters and the JSON feeder document.
//!
//! Buses are indexed `0..=N` with bus 0 the substation. Edges are directed
//! origin to destination; a flow `P_e > 0` travels from origin to destination.
//! Injections follow the generator convention, so loads inject negative power.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::FeederError;

/// Current feeder document version.
pub const SCHEMA_VERSION: u32 = 1;

/// Voltage range on which ZIP limits must stay ordered.
const ZIP_CHECK_RANGE: (f64, f64) = (0.8, 1.2);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Substation,
    Load,
    Der,
    Passive,
}

/// Linearized ZIP load: `[p_lo, p_hi, q_lo, q_hi] = alpha0 + v * alpha12`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipLoad {
    pub alpha0: [f64; 4],
    pub alpha12: [f64; 4],
}

impl ZipLoad {
    /// Linearizes an inelastic quadratic load `a0 + a1 v + a2 v^2` (for `p`
    /// and `q`) with `v^2 ~ 2v - 1`.
    pub fn from_quadratic(p: [f64; 3], q: [f64; 3]) -> Self {
        let lin = |c: [f64; 3]| (c[0] - c[2], c[1] + 2.0 * c[2]);
        let (p0, p1) = lin(p);
        let (q0, q1) = lin(q);
        ZipLoad {
            alpha0: [p0, p0, q0, q0],
            alpha12: [p1, p1, q1, q1],
        }
    }

    /// Constant-power load.
    pub fn constant_power(p: f64, q: f64) -> Self {
        ZipLoad {
            alpha0: [p, p, q, q],
            alpha12: [0.0; 4],
        }
    }

    /// `[p_lo, p_hi, q_lo, q_hi]` at voltage `v`.
    pub fn limits(&self, v: f64) -> [f64; 4] {
        std::array::from_fn(|k| self.alpha0[k] + v * self.alpha12[k])
    }

    pub fn is_inelastic(&self) -> bool {
        self.alpha0[0] == self.alpha0[1]
            && self.alpha12[0] == self.alpha12[1]
            && self.alpha0[2] == self.alpha0[3]
            && self.alpha12[2] == self.alpha12[3]
    }

    /// Same load with the `p` rows scaled by `p_scale` and `q` rows by `q_scale`.
    pub fn scaled(&self, p_scale: f64, q_scale: f64) -> Self {
        let s = [p_scale, p_scale, q_scale, q_scale];
        ZipLoad {
            alpha0: std::array::from_fn(|k| self.alpha0[k] * s[k]),
            alpha12: std::array::from_fn(|k| self.alpha12[k] * s[k]),
        }
    }

    fn ordered_on(&self, lo: f64, hi: f64) -> bool {
        [lo, hi].iter().all(|&v| {
            let l = self.limits(v);
            l[0] <= l[1] + 1e-12 && l[2] <= l[3] + 1e-12
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerSpec {
    pub p_max: f64,
    pub q_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub name: String,
    pub kind: BusKind,
    pub zip: Option<ZipLoad>,
    pub der: Option<DerSpec>,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Line,
    Switch,
    LocalRegulator,
    RemoteRegulator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegulatorMode {
    Local,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegulatorSpec {
    pub mode: RegulatorMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_high: Option<f64>,
}

impl RegulatorSpec {
    pub fn local(band_low: f64, band_high: f64) -> Self {
        RegulatorSpec {
            mode: RegulatorMode::Local,
            band_low: Some(band_low),
            band_high: Some(band_high),
        }
    }

    pub fn remote() -> Self {
        RegulatorSpec {
            mode: RegulatorMode::Remote,
            band_low: None,
            band_high: None,
        }
    }

    /// Regulation band of a local regulator.
    pub fn band(&self) -> Option<(f64, f64)> {
        Some((self.band_low?, self.band_high?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    pub r: f64,
    pub x: f64,
    pub p_lim: [f64; 2],
    pub q_lim: [f64; 2],
    pub reg: Option<RegulatorSpec>,
}

impl Edge {
    pub fn is_switch(&self) -> bool {
        self.kind == EdgeKind::Switch
    }

    pub fn is_regulator(&self) -> bool {
        matches!(self.kind, EdgeKind::LocalRegulator | EdgeKind::RemoteRegulator)
    }

    /// The bus at the other end of the edge from `bus`.
    pub fn other(&self, bus: usize) -> usize {
        if self.from == bus {
            self.to
        } else {
            self.from
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feeder {
    pub name: String,
    pub base_mva: f64,
    pub base_kv: f64,
    pub v0: f64,
    pub buses: Vec<Bus>,
    pub edges: Vec<Edge>,
}

impl Feeder {
    /// Number of non-substation buses.
    pub fn n(&self) -> usize {
        self.buses.len() - 1
    }

    pub fn switches(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(|e| e.is_switch())
    }

    pub fn num_switches(&self) -> usize {
        self.switches().count()
    }

    pub fn der_buses(&self) -> impl Iterator<Item = &Bus> + '_ {
        self.buses.iter().filter(|b| b.der.is_some())
    }

    pub fn load_buses(&self) -> impl Iterator<Item = &Bus> + '_ {
        self.buses.iter().filter(|b| b.zip.is_some())
    }

    pub fn remote_regulators(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(|e| e.kind == EdgeKind::RemoteRegulator)
    }

    pub fn local_regulators(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(|e| e.kind == EdgeKind::LocalRegulator)
    }

    /// Number of switches that must be closed: `N - |E \ E_S|`.
    pub fn closed_switch_count(&self) -> Result<usize, FeederError> {
        let fixed = self.edges.len() - self.num_switches();
        let n = self.n();
        if fixed > n || n - fixed > self.num_switches() {
            return Err(FeederError::ImpossibleRadiality {
                n,
                fixed,
                switches: self.num_switches(),
            });
        }
        Ok(n - fixed)
    }

    pub fn bus_by_name(&self, name: &str) -> Option<&Bus> {
        self.buses.iter().find(|b| b.name == name)
    }

    /// Edge ids incident to each bus.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for e in &self.edges {
            adj[e.from].push(e.id);
            adj[e.to].push(e.id);
        }
        adj
    }

    pub fn from_json(text: &str) -> Result<Self, FeederError> {
        let doc: FeederDoc = serde_json::from_str(text)?;
        load_feeder(doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, FeederError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&FeederDoc::from(self)).expect("feeder document serializes")
    }
}

/// Reduced incidence matrix `A` (|E| x N): row `e` has `+1` at the origin and
/// `-1` at the destination, with the substation column dropped.
pub fn reduced_incidence(feeder: &Feeder) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(feeder.edges.len(), feeder.n());
    for e in &feeder.edges {
        if e.from > 0 {
            a[(e.id, e.from - 1)] = 1.0;
        }
        if e.to > 0 {
            a[(e.id, e.to - 1)] = -1.0;
        }
    }
    a
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeederDoc {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub base: BaseDoc,
    pub v0: f64,
    pub buses: Vec<BusDoc>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BaseDoc {
    pub mva: f64,
    pub kv: f64,
}

/// ZIP data as stored: either the linear form or raw quadratic coefficients
/// of an inelastic load.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZipDoc {
    Linear { alpha0: [f64; 4], alpha12: [f64; 4] },
    Quadratic { p: [f64; 3], q: [f64; 3] },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BusDoc {
    pub id: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub kind: BusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zip: Option<ZipDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub der: Option<DerSpec>,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub x: f64,
    pub p_lim: [f64; 2],
    pub q_lim: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<RegulatorSpec>,
}

impl From<&Feeder> for FeederDoc {
    fn from(f: &Feeder) -> Self {
        FeederDoc {
            schema_version: SCHEMA_VERSION,
            name: f.name.clone(),
            base: BaseDoc {
                mva: f.base_mva,
                kv: f.base_kv,
            },
            v0: f.v0,
            buses: f
                .buses
                .iter()
                .map(|b| BusDoc {
                    id: b.id,
                    name: b.name.clone(),
                    kind: b.kind,
                    zip: b.zip.map(|z| ZipDoc::Linear {
                        alpha0: z.alpha0,
                        alpha12: z.alpha12,
                    }),
                    der: b.der,
                    v_min: b.v_min,
                    v_max: b.v_max,
                })
                .collect(),
            edges: f
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    id: e.id,
                    from: e.from,
                    to: e.to,
                    kind: e.kind,
                    r: e.r,
                    x: e.x,
                    p_lim: e.p_lim,
                    q_lim: e.q_lim,
                    reg: e.reg,
                })
                .collect(),
        }
    }
}

/// Validates a feeder document and converts it to a [`Feeder`].
pub fn load_feeder(doc: FeederDoc) -> Result<Feeder, FeederError> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(FeederError::SchemaVersion(doc.schema_version));
    }
    if !(doc.v0.is_finite() && doc.v0 > 0.0) {
        return Err(FeederError::Invalid(format!("substation voltage {} must be positive", doc.v0)));
    }
    let mut buses_doc = doc.buses;
    buses_doc.sort_by_key(|b| b.id);
    for (k, b) in buses_doc.iter().enumerate() {
        if b.id != k {
            return Err(if k > 0 && buses_doc[k - 1].id == b.id {
                FeederError::DuplicateBus(b.id)
            } else {
                FeederError::BusIdsNotContiguous(b.id)
            });
        }
    }
    if buses_doc.len() < 2 {
        return Err(FeederError::Invalid("a feeder needs the substation and at least one bus".into()));
    }
    let substations = buses_doc.iter().filter(|b| b.kind == BusKind::Substation).count();
    if substations > 1 {
        return Err(FeederError::MultipleSubstations(substations));
    }
    if buses_doc[0].kind != BusKind::Substation {
        return Err(FeederError::Invalid("bus 0 must be the substation".into()));
    }

    let mut buses = Vec::with_capacity(buses_doc.len());
    for b in buses_doc {
        if !(b.v_min < b.v_max) || b.v_min <= 0.0 || !b.v_max.is_finite() {
            return Err(FeederError::BadVoltageLimits {
                bus: b.id,
                v_min: b.v_min,
                v_max: b.v_max,
            });
        }
        if b.zip.is_some() && b.der.is_some() {
            return Err(FeederError::LoadAndDer(b.id));
        }
        let zip = b.zip.map(|z| match z {
            ZipDoc::Linear { alpha0, alpha12 } => ZipLoad { alpha0, alpha12 },
            ZipDoc::Quadratic { p, q } => ZipLoad::from_quadratic(p, q),
        });
        let expected = match b.kind {
            BusKind::Load => zip.is_some(),
            BusKind::Der => b.der.is_some(),
            BusKind::Substation | BusKind::Passive => zip.is_none() && b.der.is_none(),
        };
        if !expected {
            return Err(FeederError::KindMismatch(b.id));
        }
        if let Some(z) = &zip {
            let finite = z.alpha0.iter().chain(&z.alpha12).all(|c| c.is_finite());
            if !finite || !z.ordered_on(ZIP_CHECK_RANGE.0, ZIP_CHECK_RANGE.1) {
                return Err(FeederError::BadZip(b.id));
            }
        }
        if let Some(d) = &b.der {
            if !(d.p_max > 0.0 && d.q_max > 0.0) || !d.p_max.is_finite() || !d.q_max.is_finite() {
                return Err(FeederError::BadDer(b.id));
            }
        }
        buses.push(Bus {
            id: b.id,
            name: if b.name.is_empty() { b.id.to_string() } else { b.name },
            kind: b.kind,
            zip,
            der: b.der,
            v_min: b.v_min,
            v_max: b.v_max,
        });
    }

    let mut edges_doc = doc.edges;
    edges_doc.sort_by_key(|e| e.id);
    let mut seen_pairs = HashSet::new();
    let mut edges = Vec::with_capacity(edges_doc.len());
    for (k, e) in edges_doc.into_iter().enumerate() {
        if e.id != k {
            return Err(FeederError::EdgeIdsNotContiguous(e.id));
        }
        for end in [e.from, e.to] {
            if end >= buses.len() {
                return Err(FeederError::UnknownBus { edge: e.id, bus: end });
            }
        }
        if e.from == e.to {
            return Err(FeederError::SelfLoop(e.id));
        }
        let pair = (e.from.min(e.to), e.from.max(e.to));
        if !seen_pairs.insert(pair) {
            return Err(FeederError::DuplicateEdge {
                edge: e.id,
                from: e.from,
                to: e.to,
            });
        }
        if !(e.r >= 0.0) || !e.x.is_finite() || !e.r.is_finite() {
            return Err(FeederError::Invalid(format!("edge {} has invalid impedance", e.id)));
        }
        let lim_ok = |l: [f64; 2]| l[0].is_finite() && l[1].is_finite() && l[0] <= l[1];
        if !lim_ok(e.p_lim) || !lim_ok(e.q_lim) {
            return Err(FeederError::BadFlowLimits(e.id));
        }
        let reg = match (e.kind, e.reg) {
            (EdgeKind::LocalRegulator, Some(r)) if r.mode == RegulatorMode::Local => {
                let (lo, hi) = r.band().ok_or(FeederError::BadBand(e.id))?;
                if !(lo < hi) || lo <= 0.0 {
                    return Err(FeederError::BadBand(e.id));
                }
                let width = hi - lo;
                if !(0.0125..=0.025).contains(&width) {
                    log::warn!("regulator on edge {} has band width {width:.4} pu outside 0.0125..0.025", e.id);
                }
                Some(r)
            }
            (EdgeKind::RemoteRegulator, Some(r)) if r.mode == RegulatorMode::Remote => Some(r),
            (EdgeKind::RemoteRegulator, None) => Some(RegulatorSpec::remote()),
            (EdgeKind::Line | EdgeKind::Switch, None) => None,
            _ => return Err(FeederError::RegulatorMismatch(e.id)),
        };
        if reg.is_some() && (e.r != 0.0 || e.x != 0.0) {
            return Err(FeederError::Invalid(format!(
                "regulator edge {} must have zero impedance; model the series impedance as a line",
                e.id
            )));
        }
        edges.push(Edge {
            id: e.id,
            from: e.from,
            to: e.to,
            kind: e.kind,
            r: e.r,
            x: e.x,
            p_lim: e.p_lim,
            q_lim: e.q_lim,
            reg,
        });
    }

    let mut uf = UnionFind::new(buses.len());
    for e in &edges {
        uf.union(e.from, e.to);
    }
    if let Some(b) = (1..buses.len()).find(|&b| !uf.equiv(0, b)) {
        return Err(FeederError::Disconnected(b));
    }

    let feeder = Feeder {
        name: doc.name,
        base_mva: doc.base.mva,
        base_kv: doc.base.kv,
        v0: doc.v0,
        buses,
        edges,
    };
    feeder.closed_switch_count()?;
    Ok(feeder)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_zip_is_linearized_around_one() {
        // p(v) = -0.2 - 0.3 v - 0.5 v^2, v^2 ~ 2v - 1
        let z = ZipLoad::from_quadratic([-0.2, -0.3, -0.5], [0.0, 0.0, -0.1]);
        assert_eq!(z.alpha0, [0.3, 0.3, 0.1, 0.1]);
        assert_eq!(z.alpha12, [-1.3, -1.3, -0.2, -0.2]);
        let at_one = z.limits(1.0);
        assert!((at_one[0] + 1.0).abs() < 1e-15);
        assert!((at_one[2] + 0.1).abs() < 1e-15);
        assert!(z.is_inelastic());
    }
}
