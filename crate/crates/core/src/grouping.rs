//! Ward-linkage agglomerative clustering of firm feature vectors and
//! partition-matching accuracy.
//!
//! Clusters are identified by their smallest member index. At each step the
//! pair with the smallest Ward cost is merged; exact ties go to the
//! lexicographically smallest `(a, b)` pair. Costs are kept current with the
//! Lance–Williams recurrence
//!
//! ```text
//! d(k, A∪B) = [(|A|+|k|) d(k,A) + (|B|+|k|) d(k,B) - |k| d(A,B)] / (|A|+|B|+|k|)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of `N` firms into `K` nonempty groups.
///
/// Labels are zero-based (`0..K`) and canonical: groups are numbered by
/// ascending smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    k: usize,
    labels: Vec<usize>,
}

impl GroupAssignment {
    /// Build from arbitrary labels, relabelling canonically. Unused label
    /// values are dropped, so `k` counts the distinct labels present.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("assignment must cover at least one firm".into()));
        }
        let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().unwrap() + 1];
        let mut next = 0;
        let canonical = labels
            .iter()
            .map(|&l| {
                *map[l].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Ok(Self { k: next, labels: canonical })
    }

    /// Firms split into contiguous blocks whose sizes differ by at most one.
    pub fn equal_blocks(firms: usize, k: usize) -> Result<Self> {
        if k == 0 || k > firms {
            return Err(Error::InvalidInput(format!("cannot split {firms} firms into {k} groups")));
        }
        let labels: Vec<usize> = (0..firms).map(|i| i * k / firms).collect();
        Self::from_labels(&labels)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn firms(&self) -> usize {
        self.labels.len()
    }

    /// Zero-based group label of each firm.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == group)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}

/// One agglomeration step: clusters represented by `a < b` merged at `cost`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub cost: f64,
}

/// Full dendrogram, `N - 1` merges in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeHistory {
    pub firms: usize,
    pub merges: Vec<Merge>,
}

impl MergeHistory {
    /// Partition obtained by stopping when `k` clusters remain.
    pub fn cut(&self, k: usize) -> Result<GroupAssignment> {
        if k == 0 || k > self.firms {
            return Err(Error::InvalidInput(format!(
                "K = {k} outside 1..={}",
                self.firms
            )));
        }
        let mut rep: Vec<usize> = (0..self.firms).collect();
        for m in &self.merges[..self.firms - k] {
            for r in rep.iter_mut() {
                if *r == m.b {
                    *r = m.a;
                }
            }
        }
        GroupAssignment::from_labels(&rep)
    }
}

/// Increase in within-cluster sum of squares from merging two clusters.
pub fn ward_distance(size_a: usize, centroid_a: &[f64], size_b: usize, centroid_b: &[f64]) -> Result<f64> {
    if centroid_a.len() != centroid_b.len() {
        return Err(Error::DimensionMismatch {
            context: "ward centroids",
            expected: centroid_a.len(),
            found: centroid_b.len(),
        });
    }
    if size_a == 0 || size_b == 0 {
        return Err(Error::InvalidInput("cluster sizes must be positive".into()));
    }
    let (na, nb) = (size_a as f64, size_b as f64);
    let sq: f64 = centroid_a.iter().zip(centroid_b).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(na * nb / (na + nb) * sq)
}

/// Complete Ward agglomeration of `points`.
pub fn ward_linkage(points: &[Vec<f64>]) -> Result<MergeHistory> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidInput("nothing to cluster".into()));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "clustering features",
            expected: dim,
            found: p.len(),
        });
    }
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = ward_distance(1, &points[i], 1, &points[j])?;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    let mut size = vec![1usize; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let (mut bi, mut bj, mut best) = (0, 0, f64::INFINITY);
        for (x, &i) in active.iter().enumerate() {
            let row = &d[i * n..(i + 1) * n];
            for &j in &active[x + 1..] {
                if row[j] < best {
                    best = row[j];
                    bi = i;
                    bj = j;
                }
            }
        }
        if !best.is_finite() {
            return Err(Error::InvalidInput("non-finite clustering features".into()));
        }
        merges.push(Merge { a: bi, b: bj, cost: best });
        let (na, nb) = (size[bi] as f64, size[bj] as f64);
        for &k in &active {
            if k == bi || k == bj {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((na + nk) * d[k * n + bi] + (nb + nk) * d[k * n + bj] - nk * best) / (na + nb + nk);
            d[k * n + bi] = v;
            d[bi * n + k] = v;
        }
        size[bi] += size[bj];
        active.retain(|&k| k != bj);
    }
    Ok(MergeHistory { firms: n, merges })
}

/// Ward clustering of `points` cut at `k` groups.
pub fn hac_cluster(points: &[Vec<f64>], k: usize) -> Result<(GroupAssignment, MergeHistory)> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidInput(format!(
            "K = {k} outside 1..={}",
            points.len()
        )));
    }
    let history = ward_linkage(points)?;
    Ok((history.cut(k)?, history))
}

/// Largest group count accepted by [`classification_error`].
pub const MAX_MATCHED_GROUPS: usize = 8;

/// Fraction of firms whose label disagrees with `truth` under the best
/// relabelling of `assignment`.
pub fn classification_error(assignment: &GroupAssignment, truth: &GroupAssignment) -> Result<f64> {
    if assignment.firms() != truth.firms() {
        return Err(Error::DimensionMismatch {
            context: "classification error",
            expected: truth.firms(),
            found: assignment.firms(),
        });
    }
    let best = best_matching(assignment, truth)?;
    let agree: usize = best.iter().map(|&(_, _, c)| c).sum();
    Ok(1.0 - agree as f64 / truth.firms() as f64)
}

/// Label matching `(estimated, true, overlap)` maximizing total agreement.
/// Pairs involving padded (nonexistent) labels are omitted.
pub fn best_matching(assignment: &GroupAssignment, truth: &GroupAssignment) -> Result<Vec<(usize, usize, usize)>> {
    let labels = assignment.k().max(truth.k());
    if labels > MAX_MATCHED_GROUPS {
        return Err(Error::InvalidInput(format!(
            "{labels} groups exceed the exhaustive matching limit of {MAX_MATCHED_GROUPS}"
        )));
    }
    let mut confusion = vec![vec![0usize; labels]; labels];
    for (&a, &t) in assignment.labels().iter().zip(truth.labels()) {
        confusion[a][t] += 1;
    }
    let mut perm: Vec<usize> = (0..labels).collect();
    let mut best_perm = perm.clone();
    let mut best = score(&confusion, &perm);
    permute(&mut perm, 0, &mut |p| {
        let s = score(&confusion, p);
        if s > best {
            best = s;
            best_perm.copy_from_slice(p);
        }
    });
    Ok(best_perm
        .iter()
        .enumerate()
        .filter(|&(a, &t)| a < assignment.k() && t < truth.k())
        .map(|(a, &t)| (a, t, confusion[a][t]))
        .collect())
}

fn score(confusion: &[Vec<usize>], perm: &[usize]) -> usize {
    perm.iter().enumerate().map(|(a, &t)| confusion[a][t]).sum()
}

fn permute(perm: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == perm.len() {
        visit(perm);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, visit);
        perm.swap(start, i);
    }
}
