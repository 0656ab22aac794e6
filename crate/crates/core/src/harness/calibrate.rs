//! Initial part models of three qualities and the noise calibration that
//! puts their accuracies on target.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{ExemplarBase, Label};
use crate::perception::knn;
use crate::rng;
use crate::worldsim::{sample_scene, Dimension, DomainConfig, RegionRole, TrueScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Lq,
    Mq,
    Hq,
}

impl Quality {
    pub const ALL: [Quality; 3] = [Quality::Lq, Quality::Mq, Quality::Hq];

    /// Part-exposure episodes behind the initial exemplars.
    pub fn exposures(self) -> usize {
        match self {
            Quality::Lq => 20,
            Quality::Mq => 100,
            Quality::Hq => 200,
        }
    }

    /// Target held-out part accuracy, in percent.
    pub fn target(self) -> f64 {
        match self {
            Quality::Lq => 74.83,
            Quality::Mq => 88.86,
            Quality::Hq => 98.17,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quality::Lq => "lq",
            Quality::Mq => "mq",
            Quality::Hq => "hq",
        }
    }
}

impl std::fmt::Display for Quality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Quality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lq" => Ok(Quality::Lq),
            "mq" => Ok(Quality::Mq),
            "hq" => Ok(Quality::Hq),
            _ => Err(Error::Config(format!("unknown quality `{s}` (lq, mq, hq)"))),
        }
    }
}

/// Allowed distance from the target accuracy, in points.
pub const TOLERANCE: f64 = 5.0;

fn role_of(d: Dimension) -> RegionRole {
    match d {
        Dimension::Load => RegionRole::Load,
        Dimension::Cabin => RegionRole::Cabin,
    }
}

/// Taught part concepts grouped by the truck region they label.
fn taught_by_role(cfg: &DomainConfig) -> Vec<(RegionRole, Vec<String>)> {
    cfg.taught
        .iter()
        .map(|&d| {
            let mut parts: Vec<String> = cfg.types.iter().filter_map(|t| t.part(d)).map(str::to_string).collect();
            parts.sort();
            parts.dedup();
            (role_of(d), parts)
        })
        .collect()
}

/// One labelled look at a truck: each taught-dimension region becomes a
/// positive of its own part concept and a negative of the others.
pub fn part_exposure(cfg: &DomainConfig, xb: &mut ExemplarBase, scene: &TrueScene) -> Result<()> {
    for (role, parts) in taught_by_role(cfg) {
        let r = scene.truck().region_with(role);
        for p in &parts {
            xb.register(p);
            let label = if r.label.as_deref() == Some(p.as_str()) {
                Label::Positive
            } else {
                Label::Negative
            };
            xb.add_exemplar(p, r.feature.clone(), label)?;
        }
    }
    Ok(())
}

pub fn calibrate_initial_xb(quality: Quality, cfg: &DomainConfig, seed: u64) -> Result<ExemplarBase> {
    exposed_xb(quality.exposures(), cfg, seed)
}

pub fn exposed_xb(episodes: usize, cfg: &DomainConfig, seed: u64) -> Result<ExemplarBase> {
    let mut xb = ExemplarBase::new();
    for (_, parts) in taught_by_role(cfg) {
        for p in parts {
            xb.register(&p);
        }
    }
    for i in 0..episodes {
        let scene = sample_scene(cfg, rng::derive(seed, "calibration/train", i as u64));
        part_exposure(cfg, &mut xb, &scene)?;
    }
    Ok(xb)
}

/// Held-out part accuracy in percent: balanced accuracy of each taught
/// part's yes/no decision (p > 0.5; ties count half), averaged over parts.
pub fn part_accuracy(cfg: &DomainConfig, xb: &ExemplarBase, seed: u64, test_scenes: usize) -> f64 {
    let empty = Default::default();
    // part -> [(hits, total) for negatives, for positives]
    let mut tally: BTreeMap<String, [(f64, usize); 2]> = BTreeMap::new();
    for i in 0..test_scenes {
        let scene = sample_scene(cfg, rng::derive(seed, "calibration/test", i as u64));
        for (role, parts) in taught_by_role(cfg) {
            let r = scene.truck().region_with(role);
            for p in parts {
                let prob = knn(&r.feature, xb.get(&p).unwrap_or(&empty));
                let truth = r.label.as_deref() == Some(p.as_str());
                let hit = if prob == 0.5 {
                    0.5
                } else if (prob > 0.5) == truth {
                    1.0
                } else {
                    0.0
                };
                let slot = &mut tally.entry(p).or_default()[usize::from(truth)];
                slot.0 += hit;
                slot.1 += 1;
            }
        }
    }
    let per_part: Vec<f64> = tally
        .values()
        .map(|classes| {
            let rates: Vec<f64> = classes.iter().filter(|c| c.1 > 0).map(|c| c.0 / c.1 as f64).collect();
            rates.iter().sum::<f64>() / rates.len().max(1) as f64
        })
        .collect();
    100.0 * per_part.iter().sum::<f64>() / per_part.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub quality: Quality,
    pub accuracy: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub sigma: f64,
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationReport {
    pub fn worst_gap(&self) -> f64 {
        self.rows.iter().map(|r| (r.accuracy - r.target).abs()).fold(0.0, f64::max)
    }

    pub fn within_tolerance(&self) -> bool {
        self.worst_gap() <= TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub seed: u64,
    /// Independent training draws averaged per quality.
    pub repeats: usize,
    pub test_scenes: usize,
    pub sigma_grid: Vec<f64>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            seed: 0,
            repeats: 5,
            test_scenes: 200,
            sigma_grid: (0..=32).map(|i| 0.08 + 0.01 * i as f64).collect(),
        }
    }
}

/// Mean accuracy of every quality at the config's current noise.
pub fn measure(cfg: &DomainConfig, settings: &CalibrationSettings) -> Result<CalibrationReport> {
    let mut rows = Vec::new();
    for q in Quality::ALL {
        let mut acc = 0.0;
        for r in 0..settings.repeats {
            let seed = rng::derive(settings.seed, "calibration/repeat", r as u64);
            let xb = calibrate_initial_xb(q, cfg, seed)?;
            acc += part_accuracy(cfg, &xb, seed, settings.test_scenes);
        }
        rows.push(CalibrationRow {
            quality: q,
            accuracy: acc / settings.repeats.max(1) as f64,
            target: q.target(),
        });
    }
    Ok(CalibrationReport {
        sigma: cfg.noise.region_sigma,
        rows,
    })
}

/// Picks the region noise from the grid that brings all three qualities
/// closest to target, and returns the config using it.
pub fn calibrate(cfg: &DomainConfig, settings: &CalibrationSettings) -> Result<(DomainConfig, CalibrationReport)> {
    let mut best: Option<(DomainConfig, CalibrationReport)> = None;
    for &sigma in &settings.sigma_grid {
        let mut c = cfg.clone();
        c.noise.region_sigma = sigma;
        let rep = measure(&c, settings)?;
        if best.as_ref().is_none_or(|(_, b)| rep.worst_gap() < b.worst_gap()) {
            best = Some((c, rep));
        }
    }
    let (c, rep) = best.ok_or_else(|| Error::Config("empty sigma grid".into()))?;
    if !rep.within_tolerance() {
        return Err(Error::Config(format!(
            "no noise level reaches the targets; best sigma {:.3} misses by {:.2} points: {}",
            rep.sigma,
            rep.worst_gap(),
            serde_json::to_string(&rep.rows).unwrap_or_default()
        )));
    }
    Ok((c, rep))
}
