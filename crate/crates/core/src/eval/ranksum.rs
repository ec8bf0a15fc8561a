use std::collections::BTreeMap;

use serde::Serialize;
use statrs::function::erf::erfc;

use super::{check_rows, cosine_distance, SupercategoryMap};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wilcoxon {
    /// Rank sum of the first sample.
    pub w: f64,
    pub z: f64,
    pub p: f64,
}

/// Two-sample rank-sum test with midranks, tie-corrected variance and a
/// 0.5 continuity correction. `z < 0` when `x` ranks below `y`.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<Wilcoxon> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "rank-sum test needs two non-empty samples".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank-sum sample".into()));
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    let total = n + m;
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut w = 0.0;
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start + 1;
        while end < pooled.len() && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        let t = (end - start) as f64;
        // ranks start+1 ..= end
        let midrank = (start + 1 + end) as f64 / 2.0;
        w += midrank * pooled[start..end].iter().filter(|p| p.1).count() as f64;
        tie_term += t * t * t - t;
        start = end;
    }

    let mean = n * (total + 1.0) / 2.0;
    let var = n * m / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if var <= 0.0 {
        return Ok(Wilcoxon { w, z: 0.0, p: 1.0 });
    }
    let diff = w - mean;
    let corrected = diff.signum() * (diff.abs() - 0.5).max(0.0);
    let z = corrected / var.sqrt();
    let p = erfc(z.abs() / std::f64::consts::SQRT_2).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(Wilcoxon { w, z, p })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSumResult {
    pub z: f64,
    #[serde(rename = "p")]
    pub p_two_sided: f64,
    pub n_within: usize,
    pub n_between: usize,
    pub mean_within: f64,
    pub mean_between: f64,
    /// Scenes without a supercategory.
    pub unmapped_scenes: Vec<String>,
    /// Supercategories with fewer than two scenes, dropped from the test.
    pub excluded_supercategories: Vec<String>,
}

/// Compares cosine distances of scene pairs sharing a supercategory with
/// those of pairs that do not.
pub fn rank_sum_test(e: &EmbeddingMatrix, map: &SupercategoryMap) -> Result<RankSumResult> {
    check_rows(e)?;
    let mut unmapped = Vec::new();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, scene) in e.vocab().iter().enumerate() {
        match map.get(scene) {
            Some(c) => groups.entry(c).or_default().push(i),
            None => unmapped.push(scene.clone()),
        }
    }
    if !unmapped.is_empty() {
        log::warn!(
            "{} scenes have no supercategory and are excluded",
            unmapped.len()
        );
    }
    let mut excluded = Vec::new();
    groups.retain(|c, members| {
        if members.len() < 2 {
            log::warn!("supercategory `{c}` has fewer than two scenes and is excluded");
            excluded.push(c.to_string());
            false
        } else {
            true
        }
    });
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two supercategories with two or more scenes".into(),
        ));
    }

    let labelled: Vec<(usize, usize)> = groups
        .values()
        .enumerate()
        .flat_map(|(g, members)| members.iter().map(move |&i| (i, g)))
        .collect();
    let mut within = Vec::new();
    let mut between = Vec::new();
    for (a, &(i, gi)) in labelled.iter().enumerate() {
        for &(j, gj) in &labelled[a + 1..] {
            let d = cosine_distance(e.row(i), e.row(j))?;
            if gi == gj {
                within.push(d);
            } else {
                between.push(d);
            }
        }
    }
    let test = wilcoxon_rank_sum(&within, &between)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(RankSumResult {
        z: test.z,
        p_two_sided: test.p,
        n_within: within.len(),
        n_between: between.len(),
        mean_within: mean(&within),
        mean_between: mean(&between),
        unmapped_scenes: unmapped,
        excluded_supercategories: excluded,
    })
}
