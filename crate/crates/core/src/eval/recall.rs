//! Forward/reverse view-recall consistency.
//!
//! On a trajectory that retraces its poses, frame `i` and frame `n - 1 - i`
//! were produced at the same camera; a consistent world model renders them
//! alike. Scores are reported on full frames and restricted to pixels that
//! are static in both frames and covered by the later frame's memory view.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{psnr, ssim, ssim_masked};
use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::pipeline::RunOutput;
use crate::types::Image;
use crate::worldsim::is_palindrome;

/// One generated frame at a trajectory position.
#[derive(Debug, Clone, PartialEq)]
pub struct RecallSample {
    pub position: usize,
    pub image: Image,
    /// Ground-truth static pixels; all static when absent.
    pub static_mask: Option<Vec<bool>>,
    /// Pixels covered by the memory rendering used for this frame; all covered when absent.
    pub condition_mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub first: usize,
    pub second: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub masked_psnr: Option<f64>,
    pub masked_ssim: Option<f64>,
    pub masked_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
}

impl Aggregate {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Some(Self {
            mean: values.iter().sum::<f64>() / n as f64,
            median,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub pair_count: usize,
    pub psnr: Option<Aggregate>,
    pub ssim: Option<Aggregate>,
    pub masked_psnr: Option<Aggregate>,
    pub masked_ssim: Option<Aggregate>,
    pub pairs: Vec<PairScore>,
}

impl RecallReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per pair; missing masked scores are empty fields.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut out = String::from("first,second,psnr,ssim,masked_psnr,masked_ssim,masked_pixels\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.first,
                p.second,
                p.psnr,
                p.ssim,
                opt(p.masked_psnr),
                opt(p.masked_ssim),
                p.masked_pixels
            );
        }
        out
    }
}

fn check_mask(mask: &Option<Vec<bool>>, image: &Image, position: usize) -> Result<()> {
    match mask {
        Some(m) if m.len() != image.pixels().len() => Err(Error::Dimension(format!(
            "frame {position}: mask has {} entries for {} pixels",
            m.len(),
            image.pixels().len()
        ))),
        _ => Ok(()),
    }
}

/// Scores every pair `(i, n - 1 - i)` for which both frames are present.
pub fn view_recall_eval(trajectory: &[CameraPose], samples: &[RecallSample]) -> Result<RecallReport> {
    if !is_palindrome(trajectory) {
        return Err(Error::invalid("view recall needs a trajectory that retraces its poses"));
    }
    let n = trajectory.len();
    let mut by_position = HashMap::with_capacity(samples.len());
    for s in samples {
        if s.position >= n {
            return Err(Error::invalid(format!("frame position {} beyond trajectory of {n}", s.position)));
        }
        check_mask(&s.static_mask, &s.image, s.position)?;
        check_mask(&s.condition_mask, &s.image, s.position)?;
        if by_position.insert(s.position, s).is_some() {
            return Err(Error::invalid(format!("duplicate frame at position {}", s.position)));
        }
    }
    let pairs: Vec<(&RecallSample, &RecallSample)> = (0..n / 2)
        .filter_map(|i| Some((*by_position.get(&i)?, *by_position.get(&(n - 1 - i))?)))
        .collect();
    let pairs: Vec<PairScore> = pairs.par_iter().map(|(a, b)| score_pair(a, b)).collect::<Result<_>>()?;

    let col = |f: fn(&PairScore) -> Option<f64>| -> Vec<f64> { pairs.iter().filter_map(f).collect() };
    Ok(RecallReport {
        pair_count: pairs.len(),
        psnr: Aggregate::of(&col(|p| Some(p.psnr))),
        ssim: Aggregate::of(&col(|p| Some(p.ssim))),
        masked_psnr: Aggregate::of(&col(|p| p.masked_psnr)),
        masked_ssim: Aggregate::of(&col(|p| p.masked_ssim)),
        pairs,
    })
}

fn score_pair(a: &RecallSample, b: &RecallSample) -> Result<PairScore> {
    let len = a.image.pixels().len();
    let pick = |m: &Option<Vec<bool>>, k: usize| m.as_ref().map_or(true, |m| m[k]);
    let mask: Vec<bool> = (0..len)
        .map(|k| pick(&a.static_mask, k) && pick(&b.static_mask, k) && pick(&b.condition_mask, k))
        .collect();
    let masked_pixels = mask.iter().filter(|&&m| m).count();
    let (masked_psnr, masked_ssim) = if masked_pixels > 0 {
        (Some(psnr(&a.image, &b.image, Some(&mask))?), ssim_masked(&a.image, &b.image, &mask)?)
    } else {
        (None, None)
    };
    Ok(PairScore {
        first: a.position,
        second: b.position,
        psnr: psnr(&a.image, &b.image, None)?,
        ssim: ssim(&a.image, &b.image)?,
        masked_psnr,
        masked_ssim,
        masked_pixels,
    })
}

/// Recall samples for every frame of a pipeline run.
pub fn samples_from_run(run: &RunOutput) -> Vec<RecallSample> {
    run.records
        .iter()
        .flat_map(|r| {
            r.frames
                .iter()
                .zip(&r.static_masks)
                .zip(&r.condition_views)
                .map(|((f, s), v)| RecallSample {
                    position: f.index as usize,
                    image: f.image.clone(),
                    static_mask: Some(s.clone()),
                    condition_mask: Some(v.mask.clone()),
                })
        })
        .collect()
}
