use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Split};

/// Target fractions of samples for train / validation / test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios(pub [f64; 3]);

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios([0.9, 0.05, 0.05])
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let sum: f64 = self.0.iter().sum();
        if self.0.iter().any(|r| !(r.is_finite() && *r > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::BadRatios(self.0));
        }
        Ok(())
    }
}

/// Assigns whole projects to splits.
///
/// Projects are ordered by descending sample count; projects of equal size
/// keep the order of a seeded shuffle. Each project then goes to the split
/// whose sample count is furthest below its target. Afterwards every split is
/// guaranteed at least one project.
pub fn split_by_project(corpus: &Corpus, ratios: SplitRatios, seed: u64) -> Result<Corpus, CorpusError> {
    ratios.validate()?;
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &corpus.samples {
        *sizes.entry(s.project_id.as_str()).or_default() += 1;
    }
    if sizes.len() < 3 {
        return Err(CorpusError::TooFewProjects(sizes.len()));
    }

    // BTreeMap order makes the shuffle independent of record order.
    let mut projects: Vec<(&str, usize)> = sizes.into_iter().collect();
    projects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    projects.sort_by(|a, b| b.1.cmp(&a.1));

    let total = corpus.samples.len() as f64;
    let targets: Vec<f64> = ratios.0.iter().map(|r| r * total).collect();
    let mut filled = [0usize; 3];
    let mut members: [Vec<(&str, usize)>; 3] = Default::default();
    for &(project, n) in &projects {
        let k = (0..3)
            .max_by(|&a, &b| {
                let da = targets[a] - filled[a] as f64;
                let db = targets[b] - filled[b] as f64;
                // ties go to the earlier split
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("three splits");
        filled[k] += n;
        members[k].push((project, n));
    }

    // Ensure no split is left empty: steal the smallest project from the
    // split holding the most projects.
    for k in 0..3 {
        if members[k].is_empty() {
            let donor = (0..3)
                .filter(|&d| members[d].len() > 1)
                .max_by_key(|&d| (members[d].len(), std::cmp::Reverse(d)))
                .expect("at least 3 projects");
            let last = members[donor].pop().expect("donor nonempty");
            members[k].push(last);
        }
    }

    let mut assignment: BTreeMap<&str, Split> = BTreeMap::new();
    for (k, list) in members.iter().enumerate() {
        for &(p, _) in list {
            assignment.insert(p, Split::ALL[k]);
        }
    }
    let mut out = corpus.clone();
    out.split = corpus
        .samples
        .iter()
        .map(|s| (s.id.clone(), assignment[s.project_id.as_str()]))
        .collect();
    Ok(out)
}
