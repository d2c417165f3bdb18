//! Synthetic feeders and profiles: a 37-bus feeder laid out like the IEEE
//! 37-node benchmark, a small 8-bus feeder for exhaustive checks, toy graphs
//! and a seeded one-day profile generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::FeederError;
use crate::feeder::{
    load_feeder, BaseDoc, BusDoc, BusKind, DerSpec, EdgeDoc, EdgeKind, Feeder, FeederDoc, RegulatorSpec, ZipDoc,
    SCHEMA_VERSION,
};
use crate::profiles::{BusSample, Period, Profiles, ScenarioInstance, ScenarioSet};

/// Reactive capability as a fraction of the active rating.
pub const Q_RATIO: f64 = 0.44;
/// Loose default flow limit in per unit.
pub const FLOW_LIMIT: f64 = 50.0;

/// Incremental construction of a feeder document; `build` validates.
#[derive(Clone, Debug)]
pub struct FeederBuilder {
    doc: FeederDoc,
}

impl FeederBuilder {
    /// Starts with the substation at bus 0.
    pub fn new(name: &str, v0: f64) -> Self {
        FeederBuilder {
            doc: FeederDoc {
                schema_version: SCHEMA_VERSION,
                name: name.into(),
                base: BaseDoc { mva: 1.0, kv: 4.8 },
                v0,
                buses: vec![BusDoc {
                    id: 0,
                    name: "sub".into(),
                    kind: BusKind::Substation,
                    zip: None,
                    der: None,
                    v_min: 0.9 * v0,
                    v_max: 1.1 * v0,
                }],
                edges: Vec::new(),
            },
        }
    }

    pub fn base(mut self, mva: f64, kv: f64) -> Self {
        self.doc.base = BaseDoc { mva, kv };
        self
    }

    pub fn substation_name(mut self, name: &str) -> Self {
        self.doc.buses[0].name = name.into();
        self
    }

    fn push_bus(&mut self, name: &str, kind: BusKind, zip: Option<ZipDoc>, der: Option<DerSpec>, v: (f64, f64)) -> usize {
        let id = self.doc.buses.len();
        self.doc.buses.push(BusDoc {
            id,
            name: name.into(),
            kind,
            zip,
            der,
            v_min: v.0,
            v_max: v.1,
        });
        id
    }

    pub fn passive(&mut self, name: &str, v: (f64, f64)) -> usize {
        self.push_bus(name, BusKind::Passive, None, None, v)
    }

    /// Load of `p + jq` (consumption, per unit) split into constant power,
    /// current and impedance parts by `zip` fractions.
    pub fn load(&mut self, name: &str, p: f64, q: f64, zip: [f64; 3], v: (f64, f64)) -> usize {
        let doc = ZipDoc::Quadratic {
            p: zip.map(|f| -p * f),
            q: zip.map(|f| -q * f),
        };
        self.push_bus(name, BusKind::Load, Some(doc), None, v)
    }

    /// Load given directly by its linear rows.
    pub fn zip_load(&mut self, name: &str, alpha0: [f64; 4], alpha12: [f64; 4], v: (f64, f64)) -> usize {
        self.push_bus(name, BusKind::Load, Some(ZipDoc::Linear { alpha0, alpha12 }), None, v)
    }

    pub fn der(&mut self, name: &str, p_max: f64, q_max: f64, v: (f64, f64)) -> usize {
        self.push_bus(name, BusKind::Der, None, Some(DerSpec { p_max, q_max }), v)
    }

    fn push_edge(&mut self, from: usize, to: usize, kind: EdgeKind, r: f64, x: f64, reg: Option<RegulatorSpec>) -> usize {
        let id = self.doc.edges.len();
        self.doc.edges.push(EdgeDoc {
            id,
            from,
            to,
            kind,
            r,
            x,
            p_lim: [-FLOW_LIMIT, FLOW_LIMIT],
            q_lim: [-FLOW_LIMIT, FLOW_LIMIT],
            reg,
        });
        id
    }

    pub fn line(&mut self, from: usize, to: usize, r: f64, x: f64) -> usize {
        self.push_edge(from, to, EdgeKind::Line, r, x, None)
    }

    pub fn switch(&mut self, from: usize, to: usize, r: f64, x: f64) -> usize {
        self.push_edge(from, to, EdgeKind::Switch, r, x, None)
    }

    pub fn remote_regulator(&mut self, from: usize, to: usize) -> usize {
        self.push_edge(from, to, EdgeKind::RemoteRegulator, 0.0, 0.0, Some(RegulatorSpec::remote()))
    }

    pub fn local_regulator(&mut self, from: usize, to: usize, band: (f64, f64)) -> usize {
        self.push_edge(from, to, EdgeKind::LocalRegulator, 0.0, 0.0, Some(RegulatorSpec::local(band.0, band.1)))
    }

    pub fn flow_limits(&mut self, edge: usize, p: [f64; 2], q: [f64; 2]) {
        self.doc.edges[edge].p_lim = p;
        self.doc.edges[edge].q_lim = q;
    }

    pub fn doc(&self) -> &FeederDoc {
        &self.doc
    }

    pub fn build(self) -> Result<Feeder, FeederError> {
        load_feeder(self.doc)
    }
}

/// Knobs of the synthetic 37-bus feeder.
#[derive(Clone, Debug)]
pub struct Synth37Options {
    /// Constant power, current and impedance fractions of every load.
    pub zip: [f64; 3],
    pub v_limits: (f64, f64),
    /// Multiplier on every line impedance.
    pub impedance_scale: f64,
    /// Active rating of each of the five DERs in per unit.
    pub der_p_max: f64,
    /// Local regulator band around 1 pu.
    pub band: (f64, f64),
    /// Lengths in feet of the ties 742-718 and 744-710.
    pub tie_feet: [f64; 2],
}

impl Default for Synth37Options {
    fn default() -> Self {
        Synth37Options {
            zip: [0.6, 0.2, 0.2],
            v_limits: (0.97, 1.03),
            impedance_scale: 1.0,
            der_p_max: 1.0,
            band: (0.992, 1.008),
            tie_feet: [900.0, 4000.0],
        }
    }
}

/// Buses hosting the five DERs of the 37-bus feeder.
pub const DER_BUSES_37: [&str; 5] = ["705", "710", "718", "730", "738"];

// (from, to, feet, impedance class) of the radial backbone; class 0 is the
// heavy trunk conductor and 3 the lightest lateral.
const LINES_37: [(&str, &str, f64, usize); 33] = [
    ("701", "702", 960.0, 1),
    ("702", "705", 400.0, 3),
    ("702", "713", 360.0, 2),
    ("702", "703", 1320.0, 1),
    ("703", "727", 240.0, 3),
    ("703", "730", 600.0, 2),
    ("704", "714", 80.0, 3),
    ("705", "742", 320.0, 3),
    ("705", "712", 240.0, 3),
    ("706", "725", 280.0, 3),
    ("707", "724", 760.0, 3),
    ("707", "722", 120.0, 3),
    ("708", "733", 320.0, 2),
    ("708", "732", 320.0, 3),
    ("709", "731", 600.0, 2),
    ("709", "708", 320.0, 2),
    ("710", "735", 200.0, 3),
    ("710", "736", 1280.0, 3),
    ("711", "741", 400.0, 2),
    ("711", "740", 200.0, 3),
    ("713", "704", 520.0, 2),
    ("714", "718", 520.0, 3),
    ("720", "707", 920.0, 3),
    ("720", "706", 600.0, 3),
    ("727", "744", 280.0, 3),
    ("730", "709", 200.0, 2),
    ("733", "734", 560.0, 2),
    ("734", "737", 640.0, 2),
    ("734", "710", 520.0, 3),
    ("737", "738", 400.0, 2),
    ("738", "711", 400.0, 2),
    ("744", "728", 200.0, 3),
    ("744", "729", 280.0, 3),
];

/// Switchable edges: three backbone lines plus two ties.
const SWITCHES_37: [(&str, &str, f64, usize); 5] = [
    ("702", "713", 360.0, 2),
    ("703", "730", 600.0, 2),
    ("734", "710", 520.0, 3),
    ("742", "718", 0.0, 3),
    ("744", "710", 0.0, 3),
];

// Total three-phase spot load per bus in kW. The loads of DER buses sit on a
// neighbour because a bus hosts at most one device.
const LOADS_37: [(&str, f64); 22] = [
    ("701", 630.0),
    ("712", 85.0),
    ("713", 85.0),
    ("714", 123.0),
    ("720", 85.0),
    ("722", 161.0),
    ("724", 42.0),
    ("725", 42.0),
    ("727", 42.0),
    ("728", 126.0),
    ("729", 42.0),
    ("709", 85.0),
    ("731", 85.0),
    ("732", 42.0),
    ("733", 85.0),
    ("734", 42.0),
    ("735", 85.0),
    ("736", 42.0),
    ("737", 266.0),
    ("740", 85.0),
    ("741", 42.0),
    ("742", 93.0),
];

/// Reactive to active ratio of the synthetic loads.
const LOAD_Q_RATIO: f64 = 0.48;

/// Ohms per mile `(r, x)` of the four conductor classes.
const CONDUCTORS: [(f64, f64); 4] = [(0.2926, 0.1973), (0.4751, 0.2973), (0.7982, 0.4463), (1.2936, 0.4475)];

/// Nominal total active load of the 37-bus feeder in per unit.
pub fn nominal_load_37() -> f64 {
    LOADS_37.iter().map(|(_, kw)| kw / 1000.0).sum()
}

/// Synthetic 37-bus feeder: substation 799, remote regulator 799-701, local
/// regulator 704-720, DERs at 705, 710, 718, 730 and 738, five switches of
/// which three close.
pub fn synthetic_37(options: &Synth37Options) -> Result<Feeder, FeederError> {
    let mut b = FeederBuilder::new("synthetic-37", 1.0).substation_name("799");
    let z_base = 4.8f64.powi(2) / 1.0;
    let v = options.v_limits;
    let mut names: Vec<&str> = vec!["799"];
    let mut all: Vec<&str> = LINES_37.iter().flat_map(|l| [l.0, l.1]).collect();
    all.extend(["720", "775"]);
    all.sort_unstable();
    all.dedup();
    let mut ids = std::collections::HashMap::new();
    ids.insert("799", 0);
    for name in all {
        let id = if let Some(&(_, kw)) = LOADS_37.iter().find(|(n, _)| *n == name) {
            let p = kw / 1000.0;
            b.load(name, p, LOAD_Q_RATIO * p, options.zip, v)
        } else if DER_BUSES_37.contains(&name) {
            b.der(name, options.der_p_max, Q_RATIO * options.der_p_max, v)
        } else {
            b.passive(name, v)
        };
        ids.insert(name, id);
        names.push(name);
    }
    let z = |feet: f64, class: usize| {
        let (r, x) = CONDUCTORS[class];
        let miles = feet / 5280.0;
        (options.impedance_scale * r * miles / z_base, options.impedance_scale * x * miles / z_base)
    };
    b.remote_regulator(ids["799"], ids["701"]);
    for &(from, to, feet, class) in &LINES_37 {
        let (r, x) = z(feet, class);
        if SWITCHES_37.iter().any(|s| s.0 == from && s.1 == to) {
            b.switch(ids[from], ids[to], r, x);
        } else {
            b.line(ids[from], ids[to], r, x);
        }
    }
    b.local_regulator(ids["704"], ids["720"], options.band);
    // Substation transformer to the unloaded bus 775.
    b.line(ids["709"], ids["775"], 0.0018, 0.036);
    for (&(from, to, _, class), feet) in SWITCHES_37[3..].iter().zip(options.tie_feet) {
        let (r, x) = z(feet, class);
        b.switch(ids[from], ids[to], r, x);
    }
    b.build()
}

/// Eight-bus feeder with one remote regulator (0-1), one local regulator
/// (3-4), two DERs (6, 7) and three switches of which two close.
pub fn eight_bus() -> Result<Feeder, FeederError> {
    let mut b = FeederBuilder::new("eight-bus", 1.0);
    let v = (0.9, 1.1);
    let n1 = b.passive("1", v);
    let n2 = b.load("2", 0.6, 0.3, [1.0, 0.0, 0.0], v);
    let n3 = b.load("3", 0.5, 0.2, [0.5, 0.3, 0.2], v);
    let n4 = b.passive("4", v);
    let n5 = b.load("5", 0.4, 0.2, [0.7, 0.0, 0.3], v);
    let n6 = b.der("6", 1.0, Q_RATIO, v);
    let n7 = b.der("7", 1.5, 1.5 * Q_RATIO, v);
    b.remote_regulator(0, n1);
    b.line(n1, n2, 0.02, 0.04);
    b.line(n2, n3, 0.06, 0.05);
    b.local_regulator(n3, n4, (1.0, 1.02));
    b.line(n4, n5, 0.03, 0.03);
    b.switch(n2, n6, 0.03, 0.06);
    b.switch(n1, n6, 0.08, 0.10);
    b.switch(n3, n7, 0.05, 0.08);
    b.line(n6, n7, 0.04, 0.05);
    b.build()
}

/// Triangle: fixed line 0-1 and switches 1-2 and 0-2, one of which closes.
/// Bus 1 is a constant-power load and bus 2 a DER.
pub fn triangle() -> Result<Feeder, FeederError> {
    let mut b = FeederBuilder::new("triangle", 1.0);
    let v = (0.9, 1.1);
    let n1 = b.load("1", 0.5, 0.2, [1.0, 0.0, 0.0], v);
    let n2 = b.der("2", 1.0, Q_RATIO, v);
    b.line(0, n1, 0.02, 0.04);
    b.switch(n1, n2, 0.03, 0.03);
    b.switch(0, n2, 0.05, 0.08);
    b.build()
}

/// Two buses: a constant-power load fed over one line.
pub fn two_bus(p: f64, q: f64, r: f64, x: f64) -> Result<Feeder, FeederError> {
    let mut b = FeederBuilder::new("two-bus", 1.0);
    let n1 = b.load("1", p, q, [1.0, 0.0, 0.0], (0.5, 1.5));
    b.line(0, n1, r, x);
    b.build()
}

/// Cycle through the substation and `n` buses, every edge a switch.
pub fn switched_cycle(n: usize) -> Result<Feeder, FeederError> {
    let mut b = FeederBuilder::new("cycle", 1.0);
    let ids: Vec<usize> = (1..=n).map(|k| b.passive(&k.to_string(), (0.5, 1.5))).collect();
    let mut prev = 0;
    for &id in &ids {
        b.switch(prev, id, 0.01, 0.01);
        prev = id;
    }
    b.switch(prev, 0, 0.01, 0.01);
    b.build()
}

/// Random connected graph on `nodes` buses (substation included) with
/// `switches` switchable edges and between 0 and `switches` edges beyond a
/// spanning tree, so the required closed-switch count is attainable.
pub fn random_switched_graph(rng: &mut impl Rng, nodes: usize, switches: usize) -> Result<Feeder, FeederError> {
    assert!(nodes >= 2);
    let mut b = FeederBuilder::new("random", 1.0);
    let ids: Vec<usize> = (1..nodes).map(|k| b.passive(&k.to_string(), (0.5, 1.5))).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut order: Vec<usize> = std::iter::once(0).chain(ids.iter().copied()).collect();
    order[1..].shuffle(rng);
    for k in 1..order.len() {
        edges.push((order[rng.gen_range(0..k)], order[k]));
    }
    let max_pairs = nodes * (nodes - 1) / 2;
    let extra = rng.gen_range(0..=switches).min(max_pairs - edges.len());
    while edges.len() < nodes - 1 + extra {
        let (i, j) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
        if i != j && !edges.iter().any(|&(a, c)| (a, c) == (i, j) || (a, c) == (j, i)) {
            edges.push((i, j));
        }
    }
    let mut is_switch = vec![false; edges.len()];
    let mut picks: Vec<usize> = (0..edges.len()).collect();
    picks.shuffle(rng);
    for &k in picks.iter().take(switches.min(edges.len())) {
        is_switch[k] = true;
    }
    for (&(i, j), &s) in edges.iter().zip(&is_switch) {
        if s {
            b.switch(i, j, 0.01, 0.01);
        } else {
            b.line(i, j, 0.01, 0.01);
        }
    }
    b.build()
}

/// Knobs of the one-day profile generator.
#[derive(Clone, Debug)]
pub struct DayOptions {
    pub seed: u64,
    /// The total load at this percentile equals the nominal total load.
    pub load_percentile: f64,
    /// Share of the day's load energy supplied by the DERs.
    pub pv_share: f64,
    /// Relative noise amplitude on per-bus loads.
    pub load_noise: f64,
    /// Relative noise amplitude (clouds) on solar availability.
    pub cloud_noise: f64,
}

impl Default for DayOptions {
    fn default() -> Self {
        DayOptions {
            seed: 7,
            load_percentile: 0.8,
            pv_share: 0.75,
            load_noise: 0.05,
            cloud_noise: 0.05,
        }
    }
}

pub const DAY_MINUTES: usize = 1440;

/// The five operating periods of the synthetic day.
pub fn day_periods() -> Vec<Period> {
    vec![
        Period::new(0, 480),
        Period::new(480, 720),
        Period::new(720, 960),
        Period::new(960, 1200),
        Period::new(1200, 1440),
    ]
}

fn bump(m: f64, center: f64, width: f64) -> f64 {
    (-((m - center) / width).powi(2) / 2.0).exp()
}

/// Normalized residential load shape: low overnight, a morning shoulder and
/// an evening peak.
pub fn load_shape(minute: f64) -> f64 {
    0.35 + 0.25 * bump(minute, 450.0, 80.0) + 0.35 * bump(minute, 780.0, 200.0) + 0.75 * bump(minute, 1140.0, 110.0)
}

/// Normalized clear-sky solar shape between 06:00 and 19:00.
pub fn solar_shape(minute: f64) -> f64 {
    let x = (minute - 360.0) / 780.0;
    if (0.0..=1.0).contains(&x) {
        (std::f64::consts::PI * x).sin().powf(1.5)
    } else {
        0.0
    }
}

fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((v.len() - 1) as f64 * q).round() as usize;
    v[k]
}

/// Minute-level profiles for one day. Load scales share a daily shape with
/// per-bus noise and are normalized so that the total load at
/// `load_percentile` equals the nominal total; DER availability shares a
/// solar shape with per-bus cloud noise, and every DER rating is set to the
/// peak availability so that the DERs supply `pv_share` of the load energy.
///
/// Returns the profiles and the common DER rating.
pub fn synthetic_day(feeder: &Feeder, options: &DayOptions) -> (Profiles, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let nominal: Vec<(usize, f64)> = feeder
        .load_buses()
        .map(|b| {
            let zip = b.zip.expect("load bus carries ZIP data");
            (b.id, -zip.limits(1.0)[0])
        })
        .collect();
    let mut load: Vec<(usize, Vec<f64>)> = nominal
        .iter()
        .map(|&(id, _)| {
            let shift = rng.gen_range(-20.0..20.0);
            let series = (0..DAY_MINUTES)
                .map(|m| load_shape(m as f64 + shift) * (1.0 + options.load_noise * rng.gen_range(-1.0..1.0)))
                .collect();
            (id, series)
        })
        .collect();
    let total: Vec<f64> = (0..DAY_MINUTES)
        .map(|m| load.iter().zip(&nominal).map(|((_, s), (_, p))| s[m] * p).sum())
        .collect();
    let nominal_total: f64 = nominal.iter().map(|(_, p)| p).sum();
    let scale = nominal_total / percentile(&total, options.load_percentile);
    for (_, s) in &mut load {
        s.iter_mut().for_each(|x| *x *= scale);
    }
    let energy: f64 = total.iter().sum::<f64>() * scale;

    let ders: Vec<usize> = feeder.der_buses().map(|b| b.id).collect();
    let mut solar: Vec<(usize, Vec<f64>)> = ders
        .iter()
        .map(|&id| {
            let mut cloud = 0.0;
            let series = (0..DAY_MINUTES)
                .map(|m| {
                    cloud = 0.9 * cloud + 0.1 * rng.gen_range(-1.0..1.0);
                    (solar_shape(m as f64) * (1.0 + options.cloud_noise * 3.0 * cloud)).max(0.0)
                })
                .collect();
            (id, series)
        })
        .collect();
    let solar_energy: f64 = solar.iter().map(|(_, s)| s.iter().sum::<f64>()).sum();
    let k = if solar_energy > 0.0 { options.pv_share * energy / solar_energy } else { 0.0 };
    let mut rating: f64 = 0.0;
    for (_, s) in &mut solar {
        s.iter_mut().for_each(|x| *x *= k);
        rating = rating.max(s.iter().copied().fold(0.0, f64::max));
    }

    let mut profiles = Profiles::new(0, DAY_MINUTES);
    for (id, s) in load {
        profiles.insert(
            id,
            s.into_iter()
                .map(|x| BusSample {
                    p_load_scale: x,
                    q_load_scale: x,
                    p_avail: 0.0,
                })
                .collect(),
        );
    }
    for (id, s) in solar {
        profiles.insert(
            id,
            s.into_iter()
                .map(|x| BusSample {
                    p_load_scale: 1.0,
                    q_load_scale: 1.0,
                    p_avail: x,
                })
                .collect(),
        );
    }
    (profiles, rating)
}

/// Synthetic 37-bus feeder together with a day of profiles, the DER ratings
/// matched to the generated solar.
pub fn synthetic_37_day(options: &Synth37Options, day: &DayOptions) -> Result<(Feeder, Profiles), FeederError> {
    let probe = synthetic_37(options)?;
    let (profiles, rating) = synthetic_day(&probe, day);
    let feeder = synthetic_37(&Synth37Options {
        der_p_max: rating,
        ..options.clone()
    })?;
    Ok((feeder, profiles))
}

/// Two instances for [`eight_bus`]: a sunny light-load minute and a dim
/// heavy-load minute.
pub fn eight_bus_scenarios() -> ScenarioSet {
    let (n2, n3, n5, n6, n7) = (2, 3, 5, 6, 7);
    let load = |s: f64| BusSample {
        p_load_scale: s,
        q_load_scale: s,
        p_avail: 0.0,
    };
    let sun = |p: f64| BusSample {
        p_avail: p,
        ..BusSample::default()
    };
    let light = ScenarioInstance::nominal(0)
        .with(n2, load(0.8))
        .with(n3, load(0.8))
        .with(n5, load(0.8))
        .with(n6, sun(0.8))
        .with(n7, sun(1.2));
    let heavy = ScenarioInstance::nominal(1)
        .with(n2, load(1.2))
        .with(n3, load(1.2))
        .with(n5, load(1.2))
        .with(n6, sun(0.3))
        .with(n7, sun(0.45));
    ScenarioSet::from_instances(vec![light, heavy])
}
