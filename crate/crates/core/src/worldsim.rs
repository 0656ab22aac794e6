//! Synthetic truck domain.
//!
//! Pixels are replaced by latent feature vectors. Each region vector is the
//! prototype of its true label plus gaussian noise on the relevant
//! dimensions, followed by distractor dimensions (colour, size, texture) that
//! are sampled independently of the truck type. The whole-truck vector
//! averages its regions' relevant dimensions, adds noise, and appends its own
//! distractors (body colour, wheels, pose).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{FeatureVec, KnowledgeBase, WordForms};
use crate::rng;

pub const TRUCK_ID: &str = "t0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainName {
    #[serde(rename = "single_4way")]
    Single4way,
    #[serde(rename = "double_5way")]
    Double5way,
}

impl DomainName {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainName::Single4way => "single_4way",
            DomainName::Double5way => "double_5way",
        }
    }
}

impl std::str::FromStr for DomainName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_4way" => Ok(DomainName::Single4way),
            "double_5way" => Ok(DomainName::Double5way),
            _ => Err(Error::Config(format!("unknown domain `{s}`"))),
        }
    }
}

impl std::fmt::Display for DomainName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Load,
    Cabin,
}

/// One row of the ontology table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruckType {
    pub id: String,
    /// `None` for an empty flatbed.
    pub load: Option<String>,
    pub cabin: String,
}

impl TruckType {
    pub fn part(&self, dim: Dimension) -> Option<&str> {
        match dim {
            Dimension::Load => self.load.as_deref(),
            Dimension::Cabin => Some(&self.cabin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Region vector length.
    pub feature_dim: usize,
    /// Leading dimensions that carry prototype signal.
    pub relevant_dims: usize,
    /// Angle between the two cabin prototypes; load prototypes are orthogonal.
    pub cabin_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    /// Gaussian sigma on relevant region dimensions (set by calibration).
    pub region_sigma: f64,
    /// Extra gaussian sigma on the whole-truck relevant dimensions.
    pub whole_sigma: f64,
    /// Half-width of region distractor coordinates in feature space.
    pub region_distractor: f64,
    /// Half-width of whole-truck distractor coordinates in feature space.
    pub whole_distractor: f64,
    pub background_blobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNoise {
    /// Corruption probability with an empty positive set.
    pub q0: f64,
    /// Decay scale of the corruption probability in positive exemplars.
    pub tau: f64,
    /// Below this fidelity a region reference specifies no object.
    pub fidelity_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub name: DomainName,
    pub types: Vec<TruckType>,
    /// Part dimensions the teacher states rules about.
    pub taught: Vec<Dimension>,
    pub geometry: Geometry,
    pub noise: Noise,
    pub search: SearchNoise,
    /// Surface forms for every content word of the domain, by concept id.
    pub words: BTreeMap<String, WordForms>,
    /// Extra accepted surface forms: surface -> concept id.
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

fn words(entries: &[(&str, &str, &str)]) -> BTreeMap<String, WordForms> {
    entries
        .iter()
        .map(|(id, sg, pl)| (id.to_string(), WordForms::new(*sg, *pl)))
        .collect()
}

impl DomainConfig {
    pub fn single_4way() -> Self {
        Self::build(DomainName::Single4way)
    }

    pub fn double_5way() -> Self {
        Self::build(DomainName::Double5way)
    }

    pub fn named(name: DomainName) -> Self {
        Self::build(name)
    }

    fn build(name: DomainName) -> Self {
        let t = |id: &str, load: Option<&str>, cabin: &str| TruckType {
            id: id.into(),
            load: load.map(str::to_string),
            cabin: cabin.into(),
        };
        let (types, taught) = match name {
            DomainName::Single4way => (
                vec![
                    t("baseTruck", None, "quadCabin"),
                    t("dumpTruck", Some("dumper"), "quadCabin"),
                    t("missileTruck", Some("rocketLauncher"), "quadCabin"),
                    t("fireTruck", Some("ladder"), "quadCabin"),
                ],
                vec![Dimension::Load],
            ),
            DomainName::Double5way => (
                vec![
                    t("baseTruck", None, "quadCabin"),
                    t("dumpTruck", Some("dumper"), "quadCabin"),
                    t("missileTruck", Some("rocketLauncher"), "hemttCabin"),
                    t("fireTruck", Some("ladder"), "quadCabin"),
                    t("containerTruck", Some("dumper"), "hemttCabin"),
                ],
                vec![Dimension::Load, Dimension::Cabin],
            ),
        };
        DomainConfig {
            name,
            types,
            taught,
            geometry: Geometry {
                feature_dim: 16,
                relevant_dims: 10,
                cabin_angle_deg: 50.0,
            },
            noise: Noise {
                region_sigma: match name {
                    DomainName::Single4way => 0.24,
                    DomainName::Double5way => 0.11,
                },
                whole_sigma: 0.15,
                region_distractor: 1.1,
                whole_distractor: 0.5,
                background_blobs: 2,
            },
            search: SearchNoise {
                q0: 0.6,
                tau: 8.0,
                fidelity_floor: 0.5,
            },
            words: words(&[
                ("baseTruck", "base truck", "base trucks"),
                ("dumpTruck", "dump truck", "dump trucks"),
                ("missileTruck", "missile truck", "missile trucks"),
                ("fireTruck", "fire truck", "fire trucks"),
                ("containerTruck", "container truck", "container trucks"),
                ("dumper", "dumper", "dumpers"),
                ("rocketLauncher", "rocket launcher", "rocket launchers"),
                ("ladder", "ladder", "ladders"),
                ("quadCabin", "quad cabin", "quad cabins"),
                ("hemttCabin", "hemtt cabin", "hemtt cabins"),
                ("truck", "truck", "trucks"),
            ]),
            aliases: [("dumper truck", "dumpTruck"), ("dumper trucks", "dumpTruck")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DomainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("domain config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.relevant_dims < 10 || g.relevant_dims > g.feature_dim {
            return Err(Error::Config("need 10 <= relevant_dims <= feature_dim".into()));
        }
        if self.types.is_empty() {
            return Err(Error::Config("no truck types".into()));
        }
        for t in &self.types {
            for p in std::iter::once(t.id.as_str()).chain(t.load.as_deref()).chain([t.cabin.as_str()]) {
                if !self.words.contains_key(p) {
                    return Err(Error::Config(format!("no word forms for `{p}`")));
                }
            }
            if let Some(l) = &t.load {
                if label_slot(l).is_none() {
                    return Err(Error::Config(format!("unknown load part `{l}`")));
                }
            }
            if !matches!(t.cabin.as_str(), "quadCabin" | "hemttCabin") {
                return Err(Error::Config(format!("unknown cabin part `{}`", t.cabin)));
            }
        }
        let kb = self.ontology_kb();
        for (i, a) in self.types.iter().enumerate() {
            for b in &self.types[i + 1..] {
                if a.id == b.id {
                    return Err(Error::Config(format!("duplicate type `{}`", a.id)));
                }
                let (only_a, only_b, _) = kb.distinguishing_parts(&a.id, &b.id);
                if only_a.is_empty() && only_b.is_empty() {
                    return Err(Error::Config(format!("taught parts cannot tell {} from {}", a.id, b.id)));
                }
            }
        }
        Ok(())
    }

    pub fn type_ids(&self) -> Vec<&str> {
        self.types.iter().map(|t| t.id.as_str()).collect()
    }

    pub fn truck_type(&self, id: &str) -> Option<&TruckType> {
        self.types.iter().find(|t| t.id == id)
    }

    /// Part concepts the teacher talks about in this domain.
    pub fn taught_parts(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .types
            .iter()
            .flat_map(|t| self.taught.iter().filter_map(move |d| t.part(*d)))
            .map(str::to_string)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// The full ontology restricted to taught dimensions, as a KB.
    pub fn ontology_kb(&self) -> KnowledgeBase {
        let mut kb = KnowledgeBase::new();
        for t in &self.types {
            for d in &self.taught {
                if let Some(p) = t.part(*d) {
                    kb.add_whole_part(&t.id, p, None).expect("whole-part rule");
                }
            }
        }
        kb
    }

    /// Unit-norm prototype (relevant dimensions only) for a region label.
    pub fn prototype(&self, label: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.geometry.relevant_dims];
        let half = self.geometry.cabin_angle_deg.to_radians() / 2.0;
        match label {
            "quadCabin" => {
                v[4] = half.cos();
                v[5] = half.sin();
            }
            "hemttCabin" => {
                v[4] = half.cos();
                v[5] = -half.sin();
            }
            other => {
                let slot = label_slot(other).unwrap_or(8);
                v[slot] = 1.0;
            }
        }
        v
    }
}

fn label_slot(label: &str) -> Option<usize> {
    Some(match label {
        FLATBED => 0,
        "dumper" => 1,
        "rocketLauncher" => 2,
        "ladder" => 3,
        BODY => 6,
        WHEEL => 7,
        _ => return None,
    })
}

/// Labels of regions that are not taught concepts.
pub const FLATBED: &str = "flatbed";
pub const BODY: &str = "body";
pub const WHEEL: &str = "wheel";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionRole {
    Load,
    Cabin,
    Body,
    Wheel,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDistractors {
    pub color: [f64; 3],
    pub size: f64,
    pub texture: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueRegion {
    pub id: String,
    pub role: RegionRole,
    /// True label; `None` for background blobs.
    pub label: Option<String>,
    pub feature: FeatureVec,
    pub distractors: RegionDistractors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholeDistractors {
    pub body_color: [f64; 3],
    pub wheel_count: u32,
    pub wheel_size: f64,
    /// x, y, heading
    pub pose: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueObject {
    pub id: String,
    pub whole: String,
    pub feature: FeatureVec,
    pub distractors: WholeDistractors,
    pub regions: Vec<TrueRegion>,
}

impl TrueObject {
    pub fn region_with(&self, role: RegionRole) -> &TrueRegion {
        self.regions.iter().find(|r| r.role == role).expect("every truck has one region per role")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueScene {
    pub id: String,
    pub seed: u64,
    pub objects: Vec<TrueObject>,
    pub background: Vec<TrueRegion>,
}

/// Stand-in for a binary mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRef {
    pub region: String,
    pub fidelity: f64,
    /// Produced by part search rather than given by the teacher.
    #[serde(default)]
    pub proposed: bool,
}

impl RegionRef {
    pub fn exact(region: impl Into<String>) -> Self {
        RegionRef {
            region: region.into(),
            fidelity: 1.0,
            proposed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// True label of the referenced region, or `None` when it is background
    /// or the reference is too poor to specify an object.
    pub label: Option<String>,
    /// The object the region belongs to.
    pub whole: Option<String>,
}

enum Located<'a> {
    Object(&'a TrueObject),
    Region(&'a TrueRegion, Option<&'a TrueObject>),
}

impl TrueScene {
    pub fn truck(&self) -> &TrueObject {
        &self.objects[0]
    }

    pub fn regions(&self) -> impl Iterator<Item = &TrueRegion> {
        self.objects.iter().flat_map(|o| o.regions.iter()).chain(self.background.iter())
    }

    fn locate(&self, id: &str) -> Option<Located<'_>> {
        for o in &self.objects {
            if o.id == id {
                return Some(Located::Object(o));
            }
            if let Some(r) = o.regions.iter().find(|r| r.id == id) {
                return Some(Located::Region(r, Some(o)));
            }
        }
        self.background.iter().find(|r| r.id == id).map(|r| Located::Region(r, None))
    }

    pub fn region(&self, id: &str) -> Option<&TrueRegion> {
        self.regions().find(|r| r.id == id)
    }

    pub fn contains(&self, object: &str, region: &str) -> bool {
        self.objects
            .iter()
            .any(|o| o.id == object && o.regions.iter().any(|r| r.id == region))
    }

    pub fn is_object(&self, id: &str) -> bool {
        self.objects.iter().any(|o| o.id == id)
    }

    /// Feature vector seen through a reference. A degraded mask blends the
    /// region with the first background blob.
    pub fn feature_of(&self, r: &RegionRef) -> Result<FeatureVec> {
        match self.locate(&r.region) {
            Some(Located::Object(o)) => Ok(o.feature.clone()),
            Some(Located::Region(reg, _)) => {
                let f = r.fidelity.clamp(0.0, 1.0);
                if f >= 1.0 || self.background.is_empty() {
                    return Ok(reg.feature.clone());
                }
                let bg = &self.background[0].feature;
                Ok(reg.feature.iter().zip(bg).map(|(a, b)| f * a + (1.0 - f) * b).collect())
            }
            None => Err(Error::Lookup(format!("no region `{}` in scene {}", r.region, self.id))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// What the referenced region truly is.
pub fn ground_truth(scene: &TrueScene, r: &RegionRef, fidelity_floor: f64) -> Result<GroundTruth> {
    let loc = scene
        .locate(&r.region)
        .ok_or_else(|| Error::Lookup(format!("no region `{}` in scene {}", r.region, scene.id)))?;
    if r.fidelity < fidelity_floor {
        return Ok(GroundTruth { label: None, whole: None });
    }
    Ok(match loc {
        Located::Object(o) => GroundTruth {
            label: Some(o.whole.clone()),
            whole: None,
        },
        Located::Region(reg, owner) => GroundTruth {
            label: reg.label.clone(),
            whole: owner.map(|o| o.id.clone()),
        },
    })
}

fn sample_region(
    cfg: &DomainConfig,
    id: String,
    role: RegionRole,
    label: Option<&str>,
    rng: &mut rng::Rng,
    normal: &Normal<f64>,
) -> TrueRegion {
    let g = &cfg.geometry;
    let proto = cfg.prototype(label.unwrap_or("background"));
    let distractors = RegionDistractors {
        color: [rng.random(), rng.random(), rng.random()],
        size: rng.random_range(0.5..1.5),
        texture: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
    };
    let mut feature: Vec<f64> = proto.iter().map(|p| p + normal.sample(rng)).collect();
    let a = cfg.noise.region_distractor;
    let d = &distractors;
    let coords = [
        2.0 * d.color[0] - 1.0,
        2.0 * d.color[1] - 1.0,
        2.0 * d.color[2] - 1.0,
        d.size - 1.0,
        d.texture[0],
        d.texture[1],
    ];
    for i in 0..(g.feature_dim - g.relevant_dims) {
        feature.push(a * coords[i % coords.len()]);
    }
    TrueRegion {
        id,
        role,
        label: label.map(str::to_string),
        feature,
        distractors,
    }
}

/// Samples a one-truck scene. Deterministic in `seed`; the truck type is
/// uniform over the configured types.
pub fn sample_scene(cfg: &DomainConfig, seed: u64) -> TrueScene {
    let mut rng = rng::rng(rng::derive(seed, "scene", 0));
    let normal = Normal::new(0.0, cfg.noise.region_sigma.max(1e-12)).expect("valid sigma");
    let ty = &cfg.types[rng.random_range(0..cfg.types.len())];

    // ids are shuffled so they carry no hint of the region's role
    let n_regions = 4 + cfg.noise.background_blobs;
    let mut ids: Vec<String> = (0..n_regions).map(|i| format!("r{i}")).collect();
    ids.shuffle(&mut rng);
    let mut ids = ids.into_iter();
    let load_label = ty.load.as_deref().unwrap_or(FLATBED);
    let mut regions = vec![
        sample_region(cfg, ids.next().unwrap(), RegionRole::Load, Some(load_label), &mut rng, &normal),
        sample_region(cfg, ids.next().unwrap(), RegionRole::Cabin, Some(&ty.cabin), &mut rng, &normal),
        sample_region(cfg, ids.next().unwrap(), RegionRole::Body, Some(BODY), &mut rng, &normal),
        sample_region(cfg, ids.next().unwrap(), RegionRole::Wheel, Some(WHEEL), &mut rng, &normal),
    ];
    let mut background: Vec<TrueRegion> = ids
        .map(|id| sample_region(cfg, id, RegionRole::Background, None, &mut rng, &normal))
        .collect();
    regions.sort_by(|a, b| a.id.cmp(&b.id));
    background.sort_by(|a, b| a.id.cmp(&b.id));

    let distractors = WholeDistractors {
        body_color: [rng.random(), rng.random(), rng.random()],
        wheel_count: [4, 6, 8][rng.random_range(0..3)],
        wheel_size: rng.random_range(0.5..1.5),
        pose: [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        ],
    };
    let whole_normal = Normal::new(0.0, cfg.noise.whole_sigma.max(1e-12)).expect("valid sigma");
    let rel = cfg.geometry.relevant_dims;
    let mut feature: Vec<f64> = (0..rel)
        .map(|i| regions.iter().map(|r| r.feature[i]).sum::<f64>() / regions.len() as f64 + whole_normal.sample(&mut rng))
        .collect();
    let a = cfg.noise.whole_distractor;
    let d = &distractors;
    feature.extend([
        a * (2.0 * d.body_color[0] - 1.0),
        a * (2.0 * d.body_color[1] - 1.0),
        a * (2.0 * d.body_color[2] - 1.0),
        a * (d.wheel_count as f64 - 6.0) / 2.0,
        a * (d.wheel_size - 1.0) * 2.0,
        a * d.pose[0],
        a * d.pose[1],
        a * d.pose[2] / std::f64::consts::PI,
    ]);

    TrueScene {
        id: format!("scene-{seed:016x}"),
        seed,
        objects: vec![TrueObject {
            id: TRUCK_ID.into(),
            whole: ty.id.clone(),
            feature,
            distractors,
            regions,
        }],
        background,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_configs_validate() {
        DomainConfig::single_4way().validate().unwrap();
        DomainConfig::double_5way().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = DomainConfig::double_5way();
        let back = DomainConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn single_4way_types() {
        let cfg = DomainConfig::single_4way();
        let s = sample_scene(&cfg, 0);
        assert!(["baseTruck", "dumpTruck", "missileTruck", "fireTruck"].contains(&s.truck().whole.as_str()));
    }

    #[test]
    fn determinism() {
        let cfg = DomainConfig::double_5way();
        assert_eq!(sample_scene(&cfg, 42), sample_scene(&cfg, 42));
        assert_ne!(sample_scene(&cfg, 42), sample_scene(&cfg, 43));
    }

    #[test]
    fn prototypes_are_unit_norm() {
        let cfg = DomainConfig::double_5way();
        for l in ["dumper", "rocketLauncher", "ladder", "quadCabin", "hemttCabin", FLATBED, BODY, WHEEL, "background"] {
            let n: f64 = cfg.prototype(l).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12, "{l}");
        }
        let cos: f64 = cfg
            .prototype("quadCabin")
            .iter()
            .zip(cfg.prototype("hemttCabin"))
            .map(|(a, b)| a * b)
            .sum();
        assert!(cos > 0.5, "cabins are closer than loads");
    }

    #[test]
    fn ontology_soundness() {
        for cfg in [DomainConfig::single_4way(), DomainConfig::double_5way()] {
            for seed in 0..200 {
                let s = sample_scene(&cfg, seed);
                let t = s.truck();
                let ty = cfg.truck_type(&t.whole).unwrap();
                assert_eq!(t.regions.len(), 4);
                let load = t.regions.iter().find(|r| r.role == RegionRole::Load).unwrap();
                let cabin = t.regions.iter().find(|r| r.role == RegionRole::Cabin).unwrap();
                assert_eq!(load.label.as_deref(), Some(ty.load.as_deref().unwrap_or(FLATBED)));
                assert_eq!(cabin.label.as_deref(), Some(ty.cabin.as_str()));
                assert_eq!(s.objects.len(), 1);
            }
        }
    }

    #[test]
    fn ground_truth_lookup() {
        let cfg = DomainConfig::single_4way();
        let s = (0..).map(|i| sample_scene(&cfg, i)).find(|s| s.truck().whole == "dumpTruck").unwrap();
        let load = s.truck().region_with(RegionRole::Load);
        let cabin = s.truck().region_with(RegionRole::Cabin);
        let gt = ground_truth(&s, &RegionRef::exact(&load.id), 0.5).unwrap();
        assert_eq!(gt.label.as_deref(), Some("dumper"));
        assert_eq!(gt.whole.as_deref(), Some(TRUCK_ID));
        let poor = RegionRef {
            region: load.id.clone(),
            fidelity: 0.2,
            proposed: true,
        };
        assert_eq!(ground_truth(&s, &poor, 0.5).unwrap().label, None);
        let gt = ground_truth(&s, &RegionRef::exact(&cabin.id), 0.5).unwrap();
        assert_ne!(gt.label.as_deref(), Some("dumper"));
        assert!(matches!(ground_truth(&s, &RegionRef::exact("zz"), 0.5), Err(Error::Lookup(_))));
        let gt = ground_truth(&s, &RegionRef::exact(TRUCK_ID), 0.5).unwrap();
        assert_eq!(gt.label.as_deref(), Some("dumpTruck"));
    }

    #[test]
    fn degraded_reference_blends_with_background() {
        let cfg = DomainConfig::single_4way();
        let s = sample_scene(&cfg, 3);
        let r = s.truck().region_with(RegionRole::Load);
        let full = s.feature_of(&RegionRef::exact(&r.id)).unwrap();
        assert_eq!(full, r.feature);
        let half = s
            .feature_of(&RegionRef {
                region: r.id.clone(),
                fidelity: 0.5,
                proposed: true,
            })
            .unwrap();
        let bg = &s.background[0].feature;
        for i in 0..full.len() {
            assert!((half[i] - 0.5 * (full[i] + bg[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn type_frequencies_are_uniform() {
        // chi-square against the uniform oracle, 4 degrees of freedom
        let cfg = DomainConfig::double_5way();
        let n = 10_000u64;
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for seed in 0..n {
            *counts.entry(sample_scene(&cfg, seed).truck().whole.clone()).or_default() += 1.0;
        }
        assert_eq!(counts.len(), 5);
        let expected = n as f64 / 5.0;
        let chi2: f64 = counts.values().map(|c| (c - expected).powi(2) / expected).sum();
        assert!(chi2 < 18.47, "chi2 = {chi2}"); // p = 0.001 critical value
        for c in counts.values() {
            assert!((c / n as f64 - 0.2).abs() <= 0.02);
        }
    }

    #[test]
    fn distractors_independent_of_type() {
        let cfg = DomainConfig::single_4way();
        let n = 4000;
        let scenes: Vec<_> = (0..n).map(|s| sample_scene(&cfg, s)).collect();
        let types = cfg.type_ids();
        for (ti, ty) in types.iter().enumerate() {
            let ind: Vec<f64> = scenes.iter().map(|s| (s.truck().whole == *ty) as u8 as f64).collect();
            for coord in 0..3 {
                let x: Vec<f64> = scenes.iter().map(|s| s.truck().distractors.body_color[coord]).collect();
                let r = pearson(&ind, &x);
                assert!(r.abs() < 0.06, "type {ti} coord {coord}: r = {r}");
            }
            let wheels: Vec<f64> = scenes.iter().map(|s| s.truck().distractors.wheel_count as f64).collect();
            assert!(pearson(&ind, &wheels).abs() < 0.06);
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
