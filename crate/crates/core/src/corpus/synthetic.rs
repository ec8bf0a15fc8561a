use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, ImageRecord, ObjectRecord};
use crate::error::{Error, Result};

/// Every generated object is guaranteed to appear in at least this many images.
const MIN_OBJECT_IMAGES: usize = 5;

/// Parameters of a corpus with planted scene/supercategory structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_scenes: usize,
    pub n_objects: usize,
    pub images_per_scene: usize,
    /// Supercategory index of every scene.
    pub supercategories: Vec<usize>,
    /// Fraction of objects placed in a pool shared by all supercategories.
    pub overlap: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Scenes split into `n_super` contiguous, equally sized supercategories.
    pub fn balanced(
        n_scenes: usize,
        n_objects: usize,
        images_per_scene: usize,
        n_super: usize,
        overlap: f64,
        seed: u64,
    ) -> Self {
        let n_super = n_super.max(1);
        let supercategories = (0..n_scenes)
            .map(|s| s * n_super / n_scenes.max(1))
            .collect();
        SyntheticSpec {
            n_scenes,
            n_objects,
            images_per_scene,
            supercategories,
            overlap,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// (scene label, supercategory label) for every scene.
    pub supercategory: Vec<(String, String)>,
}

pub fn scene_label(scene: usize) -> String {
    format!("scene {scene:03}")
}

pub fn object_label(object: usize) -> String {
    format!("object {object:04}")
}

/// Generates a corpus in which every scene draws objects from a pool specific
/// to its supercategory plus a pool shared by all supercategories.
///
/// Objects are split into a shared pool of `round(overlap * n_objects)`
/// objects and one exclusive pool per supercategory. Half of an exclusive
/// pool is common to the supercategory; the other half is dealt out to its
/// scenes as signature objects. Each image holds a few signature, common and
/// shared objects, and every image has at least two distinct objects.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if !(0.0..=1.0).contains(&spec.overlap) {
        return Err(Error::InvalidArgument(format!(
            "overlap must lie in [0, 1], got {}",
            spec.overlap
        )));
    }
    if spec.n_scenes < 2 || spec.n_objects < 2 {
        return Err(Error::InvalidArgument(
            "need at least two scenes and two objects".into(),
        ));
    }
    if spec.supercategories.len() != spec.n_scenes {
        return Err(Error::DimensionMismatch {
            expected: spec.n_scenes,
            actual: spec.supercategories.len(),
        });
    }
    if spec.images_per_scene == 0 {
        return Err(Error::InvalidArgument(
            "images_per_scene must be positive".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // dense supercategory ids
    let mut dense = BTreeMap::new();
    for &s in &spec.supercategories {
        let next = dense.len();
        dense.entry(s).or_insert(next);
    }
    let supers: Vec<usize> = spec.supercategories.iter().map(|s| dense[s]).collect();
    let n_super = dense.len();

    let mut objects: Vec<usize> = (0..spec.n_objects).collect();
    objects.shuffle(&mut rng);
    let n_shared = ((spec.overlap * spec.n_objects as f64).round() as usize).min(spec.n_objects);
    let shared: Vec<usize> = objects[..n_shared].to_vec();
    let exclusive = &objects[n_shared..];

    let mut common = vec![Vec::new(); n_super];
    let mut signature = vec![Vec::new(); spec.n_scenes];
    for k in 0..n_super {
        let lo = k * exclusive.len() / n_super;
        let hi = (k + 1) * exclusive.len() / n_super;
        let pool = &exclusive[lo..hi];
        let scenes: Vec<usize> = (0..spec.n_scenes).filter(|&s| supers[s] == k).collect();
        let n_common = if pool.len() < 2 * scenes.len() {
            pool.len()
        } else {
            pool.len() / 2
        };
        common[k] = pool[..n_common].to_vec();
        for (j, &object) in pool[n_common..].iter().enumerate() {
            signature[scenes[j % scenes.len()]].push(object);
        }
    }

    let scene_pool = |s: usize| -> Vec<usize> {
        let mut pool = signature[s].clone();
        pool.extend(&common[supers[s]]);
        pool.extend(&shared);
        pool
    };
    for s in 0..spec.n_scenes {
        if scene_pool(s).len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "scene {s} has fewer than two candidate objects"
            )));
        }
    }

    let rate = |pool_len: usize, expected: f64| -> f64 {
        if pool_len == 0 {
            0.0
        } else {
            (expected / pool_len as f64).min(1.0)
        }
    };

    // image contents as sets of object indices
    let mut contents: Vec<(usize, Vec<usize>)> = Vec::new();
    for s in 0..spec.n_scenes {
        let p_common = rate(common[supers[s]].len(), 4.0);
        let p_shared = rate(shared.len(), 3.0);
        for _ in 0..spec.images_per_scene {
            let mut present = Vec::new();
            for &o in &signature[s] {
                if rng.random_bool(0.5) {
                    present.push(o);
                }
            }
            for &o in &common[supers[s]] {
                if rng.random_bool(p_common) {
                    present.push(o);
                }
            }
            for &o in &shared {
                if rng.random_bool(p_shared) {
                    present.push(o);
                }
            }
            let pool = scene_pool(s);
            while distinct_count(&present) < 2 {
                present.push(*pool.choose(&mut rng).expect("non-empty pool"));
            }
            present.sort_unstable();
            present.dedup();
            contents.push((s, present));
        }
    }

    // top up rare objects inside images whose scene pool contains them
    let mut freq = vec![0usize; spec.n_objects];
    for (_, present) in &contents {
        for &o in present {
            freq[o] += 1;
        }
    }
    for object in 0..spec.n_objects {
        let candidates: Vec<usize> = contents
            .iter()
            .enumerate()
            .filter(|(_, (s, present))| {
                !present.contains(&object) && scene_pool(*s).contains(&object)
            })
            .map(|(k, _)| k)
            .collect();
        let missing = MIN_OBJECT_IMAGES.saturating_sub(freq[object]);
        for &k in candidates.choose_multiple(&mut rng, missing) {
            let present = &mut contents[k].1;
            present.push(object);
            present.sort_unstable();
            freq[object] += 1;
        }
    }

    let mut counters = vec![0usize; spec.n_scenes];
    let records = contents
        .into_iter()
        .map(|(s, present)| {
            let index = counters[s];
            counters[s] += 1;
            let mut objects = Vec::new();
            for o in present {
                let copies = if rng.random_bool(0.2) { 2 } else { 1 };
                for _ in 0..copies {
                    objects.push(ObjectRecord {
                        iid: objects.len() as u32 + 1,
                        label: object_label(o),
                        parent: None,
                    });
                }
            }
            ImageRecord {
                image_id: format!("synth_{s:03}_{index:05}"),
                scene: scene_label(s),
                objects,
                label_map: None,
            }
        })
        .collect();

    let corpus = Corpus::from_records(records)?;
    let supercategory = (0..spec.n_scenes)
        .map(|s| (scene_label(s), format!("super {}", supers[s])))
        .collect();
    Ok(SyntheticCorpus {
        corpus,
        supercategory,
    })
}

fn distinct_count(objects: &[usize]) -> usize {
    let mut v = objects.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}
