use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{Result, TrainerError};
use crate::corpus::Corpus;

/// Draws P identities × K records. Identities need at least two records to be
/// eligible; those with fewer than K are topped up by sampling with
/// replacement.
#[derive(Debug, Clone)]
pub struct PkSampler {
    groups: Vec<Vec<usize>>,
}

impl PkSampler {
    /// Groups record positions by label; group order follows label order.
    pub fn from_labels<L: Ord + Clone>(labels: &[L]) -> Self {
        let mut by: BTreeMap<L, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            by.entry(l.clone()).or_default().push(i);
        }
        Self {
            groups: by.into_values().filter(|g| g.len() >= 2).collect(),
        }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        let labels: Vec<&str> = corpus.records().iter().map(|r| r.identity()).collect();
        Self::from_labels(&labels)
    }

    pub fn eligible(&self) -> usize {
        self.groups.len()
    }

    /// Indices grouped identity by identity, K at a time.
    pub fn sample<R: Rng + ?Sized>(&self, p: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if p > self.groups.len() {
            return Err(TrainerError::NotEnoughIdentities {
                needed: p,
                eligible: self.groups.len(),
            });
        }
        let mut out = Vec::with_capacity(p * k);
        for g in index::sample(rng, self.groups.len(), p) {
            let members = &self.groups[g];
            if members.len() >= k {
                out.extend(
                    index::sample(rng, members.len(), k)
                        .into_iter()
                        .map(|i| members[i]),
                );
            } else {
                let mut chosen = members.clone();
                chosen.shuffle(rng);
                while chosen.len() < k {
                    chosen.push(members[rng.random_range(0..members.len())]);
                }
                out.extend(chosen);
            }
        }
        Ok(out)
    }
}

pub fn pk_sample<R: Rng + ?Sized>(
    corpus: &Corpus,
    p: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    PkSampler::from_corpus(corpus).sample(p, k, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn four_by_four() {
        let labels: Vec<u32> = (0..40).map(|i| i / 5).collect();
        let s = PkSampler::from_labels(&labels);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = s.sample(4, 4, &mut rng).unwrap();
        assert_eq!(b.len(), 16);
        for chunk in b.chunks(4) {
            assert!(chunk.iter().all(|&i| labels[i] == labels[chunk[0]]));
            let mut c = chunk.to_vec();
            c.dedup();
            assert_eq!(c.len(), 4);
        }
        let mut ids: Vec<u32> = b.chunks(4).map(|c| labels[c[0]]).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn small_identity_is_filled_with_repeats() {
        let labels = [0, 0, 1, 1, 1, 1];
        let s = PkSampler::from_labels(&labels);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = s.sample(2, 4, &mut rng).unwrap();
        let zeros: Vec<usize> = b.iter().copied().filter(|&i| labels[i] == 0).collect();
        assert_eq!(zeros.len(), 4);
        assert!(zeros.contains(&0) && zeros.contains(&1));
    }

    #[test]
    fn singletons_are_not_eligible() {
        let s = PkSampler::from_labels(&[0, 1, 2, 2]);
        assert_eq!(s.eligible(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(
            s.sample(2, 2, &mut rng),
            Err(TrainerError::NotEnoughIdentities {
                needed: 2,
                eligible: 1
            })
        ));
    }

    #[test]
    fn draws_cover_every_identity() {
        let labels: Vec<u32> = (0..60).map(|i| i / 3).collect();
        let s = PkSampler::from_labels(&labels);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = vec![0u32; 20];
        for _ in 0..10_000 {
            for c in s.sample(4, 2, &mut rng).unwrap().chunks(2) {
                hits[labels[c[0]] as usize] += 1;
            }
        }
        // each identity expected 2000 times
        assert!(hits.iter().all(|&h| (1700..2300).contains(&h)), "{hits:?}");
    }
}
