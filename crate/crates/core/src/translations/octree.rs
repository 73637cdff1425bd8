//! Uniform octree and the far-field passes (M2M up, M2L across, L2L down).

use super::kernels::{self, CExp, RealComplexMap};
use crate::error::{Error, Result};
use crate::geometry::SphereSystem;
use crate::harmonics::n_coeffs;
use crate::operators::GlobalCoeffVector;
use crate::par::{map_indexed, ExecPolicy};
use nalgebra::Vector3;
use std::collections::HashMap;

const TARGET_OCCUPANCY: f64 = 8.0;

/// Nonempty boxes of one level.
#[derive(Debug, Clone, Default)]
pub struct TreeLevel {
    pub keys: Vec<[u32; 3]>,
    pub centers: Vec<Vector3<f64>>,
    pub lookup: HashMap<[u32; 3], usize>,
    pub parent: Vec<usize>,
    pub children: Vec<Vec<usize>>,
    /// Well-separated boxes whose parents are neighbours of this box's parent.
    pub interactions: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Octree {
    pub origin: Vector3<f64>,
    pub width: f64,
    pub depth: u32,
    pub order: usize,
    pub levels: Vec<TreeLevel>,
    pub leaf_spheres: Vec<Vec<usize>>,
    pub sphere_leaf: Vec<usize>,
    /// Per leaf: the leaves in its 3×3×3 neighbourhood, itself included.
    pub near: Vec<Vec<usize>>,
    pub centers: Vec<Vector3<f64>>,
    pub radii: Vec<f64>,
}

impl Octree {
    pub fn leaf_width(&self) -> f64 {
        self.width / (1u64 << self.depth) as f64
    }

    pub fn mean_leaf_occupancy(&self) -> f64 {
        self.centers.len() as f64 / self.leaf_spheres.len() as f64
    }

    pub fn n_spheres(&self) -> usize {
        self.centers.len()
    }
}

fn leaf_keys(centers: &[Vector3<f64>], origin: &Vector3<f64>, width: f64, depth: u32) -> Vec<[u32; 3]> {
    let nb = 1u64 << depth;
    let w = width / nb as f64;
    centers
        .iter()
        .map(|c| {
            let mut k = [0u32; 3];
            for a in 0..3 {
                let v = ((c[a] - origin[a]) / w).floor();
                k[a] = v.clamp(0.0, (nb - 1) as f64) as u32;
            }
            k
        })
        .collect()
}

fn occupancy(keys: &[[u32; 3]]) -> f64 {
    let mut set: HashMap<[u32; 3], usize> = HashMap::new();
    for k in keys {
        *set.entry(*k).or_default() += 1;
    }
    keys.len() as f64 / set.len() as f64
}

fn adjacent(a: &[u32; 3], b: &[u32; 3]) -> bool {
    (0..3).all(|i| a[i].abs_diff(b[i]) <= 1)
}

/// Builds the octree. `levels = None` picks the smallest depth whose mean
/// occupancy over nonempty leaves is at most 8, capped at the deepest depth
/// whose leaves are still at least one sphere diameter wide.
pub fn build_octree(system: &SphereSystem, levels: Option<u32>, order: usize) -> Result<Octree> {
    if system.is_empty() {
        return Err(Error::EmptySystem);
    }
    let centers: Vec<Vector3<f64>> = system.spheres.iter().map(|s| s.center).collect();
    let radii: Vec<f64> = system.spheres.iter().map(|s| s.radius).collect();
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for (c, r) in centers.iter().zip(&radii) {
        for a in 0..3 {
            lo[a] = lo[a].min(c[a] - r);
            hi[a] = hi[a].max(c[a] + r);
        }
    }
    let width = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let mid = (lo + hi) * 0.5;
    let origin = mid - Vector3::repeat(width * 0.5);
    let diameter = 2.0 * radii.iter().cloned().fold(0.0, f64::max);
    let fits = |d: u32| width / (1u64 << d) as f64 >= diameter;

    let depth = match levels {
        Some(d) => {
            if !fits(d) {
                return Err(Error::Depth {
                    depth: d,
                    leaf_width: width / (1u64 << d) as f64,
                    diameter,
                });
            }
            d
        }
        None => {
            let mut d = 0;
            while occupancy(&leaf_keys(&centers, &origin, width, d)) > TARGET_OCCUPANCY && fits(d + 1) && d < 20 {
                d += 1;
            }
            d
        }
    };

    let keys = leaf_keys(&centers, &origin, width, depth);
    let mut levels_v: Vec<TreeLevel> = (0..=depth).map(|_| TreeLevel::default()).collect();
    let mut leaf_spheres: Vec<Vec<usize>> = Vec::new();
    let mut sphere_leaf = vec![0; centers.len()];
    {
        let leaf = &mut levels_v[depth as usize];
        for (i, k) in keys.iter().enumerate() {
            let idx = *leaf.lookup.entry(*k).or_insert_with(|| {
                leaf.keys.push(*k);
                leaf_spheres.push(Vec::new());
                leaf.keys.len() - 1
            });
            leaf_spheres[idx].push(i);
            sphere_leaf[i] = idx;
        }
    }
    for l in (0..depth as usize).rev() {
        let child_keys = levels_v[l + 1].keys.clone();
        let mut parents = Vec::with_capacity(child_keys.len());
        {
            let lev = &mut levels_v[l];
            for ck in &child_keys {
                let pk = [ck[0] / 2, ck[1] / 2, ck[2] / 2];
                let idx = *lev.lookup.entry(pk).or_insert_with(|| {
                    lev.keys.push(pk);
                    lev.keys.len() - 1
                });
                parents.push(idx);
            }
            lev.children = vec![Vec::new(); lev.keys.len()];
            for (c, &p) in parents.iter().enumerate() {
                lev.children[p].push(c);
            }
        }
        levels_v[l + 1].parent = parents;
    }
    levels_v[depth as usize].children = vec![Vec::new(); levels_v[depth as usize].keys.len()];
    levels_v[0].parent = vec![usize::MAX; levels_v[0].keys.len()];

    for (l, lev) in levels_v.iter_mut().enumerate() {
        let w = width / (1u64 << l) as f64;
        lev.centers = lev
            .keys
            .iter()
            .map(|k| origin + Vector3::new(k[0] as f64 + 0.5, k[1] as f64 + 0.5, k[2] as f64 + 0.5) * w)
            .collect();
    }

    // interaction lists: children of the parent's neighbours that are not adjacent
    for l in 0..=depth as usize {
        let n = levels_v[l].keys.len();
        let mut lists = vec![Vec::new(); n];
        if l >= 2 {
            let (upper, lower) = levels_v.split_at(l);
            let parent_level = &upper[l - 1];
            let lev = &lower[0];
            for (b, list) in lists.iter_mut().enumerate() {
                let key = lev.keys[b];
                let pk = parent_level.keys[lev.parent[b]];
                for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dz in -1i64..=1 {
                            let q = [pk[0] as i64 + dx, pk[1] as i64 + dy, pk[2] as i64 + dz];
                            if q.iter().any(|v| *v < 0) {
                                continue;
                            }
                            let q = [q[0] as u32, q[1] as u32, q[2] as u32];
                            if let Some(&pi) = parent_level.lookup.get(&q) {
                                for &c in &parent_level.children[pi] {
                                    if !adjacent(&lev.keys[c], &key) {
                                        list.push(c);
                                    }
                                }
                            }
                        }
                    }
                }
                list.sort_unstable();
            }
        }
        levels_v[l].interactions = lists;
    }

    let leaf = &levels_v[depth as usize];
    let near = leaf
        .keys
        .iter()
        .map(|key| {
            let mut v = Vec::new();
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dz in -1i64..=1 {
                        let q = [key[0] as i64 + dx, key[1] as i64 + dy, key[2] as i64 + dz];
                        if q.iter().any(|v| *v < 0) {
                            continue;
                        }
                        if let Some(&i) = leaf.lookup.get(&[q[0] as u32, q[1] as u32, q[2] as u32]) {
                            v.push(i);
                        }
                    }
                }
            }
            v.sort_unstable();
            v
        })
        .collect();

    Ok(Octree {
        origin,
        width,
        depth,
        order,
        levels: levels_v,
        leaf_spheres,
        sphere_leaf,
        near,
        centers,
        radii,
    })
}

impl Octree {
    /// Complex local expansions of order `target_order` at every sphere center
    /// of the potential generated by all other spheres, whose complex
    /// multipoles (about their centers) are `sources`.
    pub(crate) fn evaluate(&self, sources: &[CExp], target_order: usize, policy: ExecPolicy) -> Vec<CExp> {
        let p = self.order;
        let depth = self.depth as usize;
        let far = depth >= 2;

        // upward pass
        let mut multipoles: Vec<Vec<CExp>> = vec![Vec::new(); depth + 1];
        if far {
            let leaf = &self.levels[depth];
            multipoles[depth] = map_indexed(policy, leaf.keys.len(), |b| {
                let mut out = CExp::zeros(p);
                let mut reg = CExp::zeros(p);
                for &i in &self.leaf_spheres[b] {
                    kernels::regular(p, &(self.centers[i] - leaf.centers[b]), &mut reg);
                    kernels::m2m_acc(&sources[i], &reg, &mut out);
                }
                out.mirror();
                out
            });
            for l in (2..depth).rev() {
                let lev = &self.levels[l];
                let below = &multipoles[l + 1];
                let child_centers = &self.levels[l + 1].centers;
                let m = map_indexed(policy, lev.keys.len(), |b| {
                    let mut out = CExp::zeros(p);
                    let mut reg = CExp::zeros(p);
                    for &c in &lev.children[b] {
                        kernels::regular(p, &(child_centers[c] - lev.centers[b]), &mut reg);
                        kernels::m2m_acc(&below[c], &reg, &mut out);
                    }
                    out.mirror();
                    out
                });
                multipoles[l] = m;
            }
        }

        // downward pass
        let mut locals: Vec<CExp> = Vec::new();
        if far {
            #[allow(clippy::needless_range_loop)]
            for l in 2..=depth {
                let lev = &self.levels[l];
                let parent_centers = &self.levels[l - 1].centers;
                let parent_locals = &locals;
                let mults = &multipoles[l];
                let next = map_indexed(policy, lev.keys.len(), |b| {
                    let mut out = CExp::zeros(p);
                    if l > 2 {
                        let pb = lev.parent[b];
                        let mut reg = CExp::zeros(p);
                        kernels::regular(p, &(lev.centers[b] - parent_centers[pb]), &mut reg);
                        kernels::l2l_acc(&parent_locals[pb], &reg, &mut out);
                    }
                    let mut irr = CExp::zeros(2 * p);
                    for &s in &lev.interactions[b] {
                        kernels::irregular(2 * p, &(lev.centers[b] - lev.centers[s]), &mut irr);
                        kernels::m2l_acc(&mults[s], &irr, &mut out, false);
                    }
                    out.mirror();
                    out
                });
                locals = next;
            }
        }

        // leaves: far field by L2L, near field by direct M2L
        let leaf = &self.levels[depth];
        map_indexed(policy, self.centers.len(), |i| {
            let b = self.sphere_leaf[i];
            let mut out = CExp::zeros(target_order);
            if far {
                let mut reg = CExp::zeros(p);
                kernels::regular(p, &(self.centers[i] - leaf.centers[b]), &mut reg);
                kernels::l2l_acc(&locals[b], &reg, &mut out);
            }
            let mut irr = CExp::zeros(0);
            for &nb in &self.near[b] {
                for &j in &self.leaf_spheres[nb] {
                    if j == i {
                        continue;
                    }
                    let ord = sources[j].order + target_order;
                    if irr.order != ord {
                        irr = CExp::zeros(ord);
                    }
                    kernels::irregular(ord, &(self.centers[i] - self.centers[j]), &mut irr);
                    kernels::m2l_acc(&sources[j], &irr, &mut out, false);
                }
            }
            out.mirror();
            out
        })
    }
}

/// Real local-expansion coefficients (field `Σ L ρ^l Y` about each sphere
/// center, degree ≤ `target_degree`) of the single-layer potential generated
/// by all other spheres' `densities`. The self term is left to the caller.
pub fn tree_potential(octree: &Octree, densities: &GlobalCoeffVector, target_degree: usize) -> Result<GlobalCoeffVector> {
    tree_potential_with(octree, densities, target_degree, ExecPolicy::default())
}

pub fn tree_potential_with(
    octree: &Octree,
    densities: &GlobalCoeffVector,
    target_degree: usize,
    policy: ExecPolicy,
) -> Result<GlobalCoeffVector> {
    if densities.n_spheres() != octree.n_spheres() {
        return Err(Error::SizeMismatch {
            expected: octree.n_spheres(),
            got: densities.n_spheres(),
        });
    }
    let map = RealComplexMap::new(densities.degree.max(target_degree));
    let sources = super::complex_multipoles(&octree.radii, densities, &map, policy);
    let locals = octree.evaluate(&sources, target_degree, policy);
    let mut out = GlobalCoeffVector::zeros(octree.n_spheres(), target_degree);
    let nc = n_coeffs(target_degree);
    for (i, c) in locals.iter().enumerate() {
        map.local_from_complex(c, target_degree, &mut out.data[i * nc..(i + 1) * nc]);
    }
    Ok(out)
}
