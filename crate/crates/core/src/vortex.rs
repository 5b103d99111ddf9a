//! Vortex detection by plaquette winding, Jacobian ball masses, a lower-bound
//! estimator for the dual Hölder norm, density-ratio diagnostics and
//! frame-to-frame tracking.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gl::{jacobian, Vortex};
use crate::grid::{ComplexField, Grid, ScalarField};
use crate::stepper::StepObserver;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexSet {
    pub vortices: Vec<Vortex>,
    pub r_merge: f64,
    /// Plaquettes with nonzero winding before clustering.
    pub plaquettes: usize,
}

impl VortexSet {
    pub fn empty(r_merge: f64) -> Self {
        Self {
            vortices: Vec::new(),
            r_merge,
            plaquettes: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.vortices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vortices.is_empty()
    }

    pub fn total_degree(&self) -> i64 {
        self.vortices.iter().map(|v| v.degree as i64).sum()
    }

    /// `π Σ d_k δ_{a_k}`.
    pub fn atomic_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::Atoms(
            self.vortices
                .iter()
                .map(|v| (v.pos(), std::f64::consts::PI * v.degree as f64))
                .collect(),
        )
    }
}

/// Nodes of the discrete ball `|x - c| ≤ r` with their (minimal-image)
/// displacement from `c`.
pub fn ball_nodes(grid: &Grid, c: [f64; 2], r: f64) -> Vec<(usize, [f64; 2])> {
    let h = grid.h();
    let nodes = grid.nodes() as i64;
    let span = |x: f64| {
        let lo = ((x - r) / h).floor() as i64;
        let hi = ((x + r) / h).ceil() as i64;
        if grid.is_torus() {
            let (lo, hi) = if hi - lo + 1 > nodes { (0, nodes - 1) } else { (lo, hi) };
            (lo, hi)
        } else {
            (lo.max(0), hi.min(nodes - 1))
        }
    };
    let (i0, i1) = span(c[0]);
    let (j0, j1) = span(c[1]);
    let mut out = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let (ii, jj) = (i.rem_euclid(nodes) as usize, j.rem_euclid(nodes) as usize);
            let d = grid.displacement(c, grid.point(ii, jj));
            if d[0] * d[0] + d[1] * d[1] <= r * r {
                out.push((grid.idx(ii, jj), d));
            }
        }
    }
    if grid.is_torus() {
        out.sort_unstable_by_key(|&(k, _)| k);
        out.dedup_by_key(|&mut (k, _)| k);
    }
    out
}

fn point_weight(grid: &Grid, k: usize) -> f64 {
    let nodes = grid.nodes();
    grid.weight(k % nodes, k / nodes)
}

/// Phase increment from `a` to `b` in `[-π, π]`, antisymmetric in `(a, b)`.
/// An exact half turn is `+π` when `a` precedes `b` lexicographically.
fn winding(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    use std::f64::consts::PI;
    let p = a.conj() * b;
    if p.re == 0.0 && p.im == 0.0 {
        return 0.0;
    }
    if p.im == 0.0 && p.re < 0.0 {
        let key = |z: num_complex::Complex64| (z.re, z.im);
        return match key(a).partial_cmp(&key(b)) {
            Some(std::cmp::Ordering::Less) => PI,
            Some(std::cmp::Ordering::Greater) => -PI,
            _ => 0.0,
        };
    }
    p.arg()
}

/// Plaquette windings clustered within `r_merge`; a cluster's degree is its
/// rounded total winding, so plaquettes touching an exact zero (fractional
/// winding) are absorbed. Each cluster is placed at
/// the `|J|`-weighted centroid of the nodes within `r_merge` of its plaquettes'
/// mean. Clusters of zero net degree are dropped.
pub fn detect(u: &ComplexField, r_merge: f64) -> VortexSet {
    let g = u.grid;
    let n = g.n();
    let h = g.h();
    let cells = if g.is_torus() { n } else { g.nodes() - 1 };
    let wrap = |i: usize| if i == g.nodes() { 0 } else { i };
    let mut hits: Vec<([f64; 2], f64)> = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            let (i1, j1) = (wrap(i + 1), wrap(j + 1));
            let c = [
                u.at(g.idx(i, j)),
                u.at(g.idx(i1, j)),
                u.at(g.idx(i1, j1)),
                u.at(g.idx(i, j1)),
            ];
            let total = winding(c[0], c[1]) + winding(c[1], c[2]) + winding(c[2], c[3]) + winding(c[3], c[0]);
            let w = total / (2.0 * std::f64::consts::PI);
            if w.abs() > 1e-6 {
                hits.push(([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h], w));
            }
        }
    }
    let mut parent: Vec<usize> = (0..hits.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for a in 0..hits.len() {
        for b in a + 1..hits.len() {
            if g.distance(hits[a].0, hits[b].0) <= r_merge {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut clusters: Vec<(usize, Vec<usize>)> = Vec::new();
    for a in 0..hits.len() {
        let r = find(&mut parent, a);
        match clusters.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(a),
            None => clusters.push((r, vec![a])),
        }
    }
    let jac = if clusters.is_empty() { None } else { Some(jacobian(u)) };
    let mut vortices = Vec::new();
    for (_, members) in &clusters {
        let degree = members.iter().map(|&m| hits[m].1).sum::<f64>().round() as i32;
        if degree == 0 {
            continue;
        }
        let anchor = hits[members[0]].0;
        let mut mean = [0.0; 2];
        for &m in members {
            let d = g.displacement(anchor, hits[m].0);
            mean[0] += d[0] / members.len() as f64;
            mean[1] += d[1] / members.len() as f64;
        }
        let c0 = [anchor[0] + mean[0], anchor[1] + mean[1]];
        let jac = jac.as_ref().expect("computed when clusters exist");
        let (mut wsum, mut off) = (0.0, [0.0; 2]);
        for (k, d) in ball_nodes(&g, c0, r_merge.max(2.0 * h)) {
            let w = jac.data[k].abs();
            wsum += w;
            off[0] += w * d[0];
            off[1] += w * d[1];
        }
        let mut pos = c0;
        if wsum > 0.0 {
            pos = [c0[0] + off[0] / wsum, c0[1] + off[1] / wsum];
        }
        let pos = if g.is_torus() {
            g.wrap(pos)
        } else {
            [pos[0].clamp(0.0, g.side()), pos[1].clamp(0.0, g.side())]
        };
        vortices.push(Vortex::new(pos[0], pos[1], degree));
    }
    VortexSet {
        vortices,
        r_merge,
        plaquettes: hits.len(),
    }
}

/// `∫_{B_r(c)} J` by node quadrature over the discrete ball.
pub fn ball_mass(j: &ScalarField, c: [f64; 2], r: f64) -> f64 {
    let g = &j.grid;
    let terms: Vec<f64> = ball_nodes(g, c, r)
        .into_iter()
        .map(|(k, _)| point_weight(g, k) * j.data[k])
        .collect();
    crate::grid::pairwise_sum(&terms)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiscreteMeasure {
    /// `ρ dx` for a grid density `ρ`.
    Density(ScalarField),
    /// `Σ w_i δ_{x_i}`.
    Atoms(Vec<([f64; 2], f64)>),
}

impl DiscreteMeasure {
    pub fn total_variation(&self) -> f64 {
        match self {
            Self::Density(f) => {
                let abs = f.map(f64::abs);
                crate::grid::integrate(&abs)
            }
            Self::Atoms(a) => a.iter().map(|(_, w)| w.abs()).sum(),
        }
    }

    fn atoms(&self) -> &[([f64; 2], f64)] {
        match self {
            Self::Density(_) => &[],
            Self::Atoms(a) => a,
        }
    }

    fn pair(&self, grid: &Grid, phi: &Cone) -> f64 {
        match self {
            Self::Density(f) => {
                let terms: Vec<f64> = ball_nodes(grid, phi.center, phi.radius)
                    .into_iter()
                    .map(|(k, d)| point_weight(grid, k) * f.data[k] * phi.profile(d))
                    .collect();
                crate::grid::pairwise_sum(&terms)
            }
            Self::Atoms(a) => a
                .iter()
                .map(|&(x, w)| {
                    let d = grid.displacement(phi.center, x);
                    w * phi.profile(d)
                })
                .sum(),
        }
    }

    fn mass(&self) -> f64 {
        match self {
            Self::Density(f) => crate::grid::integrate(f),
            Self::Atoms(a) => a.iter().map(|(_, w)| w).sum(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Cone {
    center: [f64; 2],
    radius: f64,
}

impl Cone {
    fn profile(&self, d: [f64; 2]) -> f64 {
        let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
        (1.0 - r / self.radius).max(0.0)
    }
}

/// Multiscale cone dictionary `φ = A (1 - |x - c|/ρ)₊` with
/// `A = 1/(1 + ρ^{-α})`, so that `sup|φ| + [φ]_α ≤ 1`. On the square every
/// cone is supported inside the domain; on the torus the constant function
/// is included.
#[derive(Clone, Debug)]
pub struct TestDictionary {
    pub lattice: usize,
    pub levels: usize,
    pub rho_min: f64,
}

impl TestDictionary {
    pub fn new(lattice: usize, levels: usize, rho_min: f64) -> Self {
        Self {
            lattice,
            levels,
            rho_min,
        }
    }

    /// 16×16 centers, dyadic radii from `L/4` down to `max(2h, L/256)`.
    pub fn standard(grid: &Grid) -> Self {
        Self::new(16, 7, (2.0 * grid.h()).max(grid.side() / 256.0))
    }

    fn radii(&self, grid: &Grid) -> Vec<f64> {
        let mut r = grid.side() / 4.0;
        let mut out = Vec::new();
        for _ in 0..self.levels {
            if r < self.rho_min {
                break;
            }
            out.push(r);
            r /= 2.0;
        }
        out
    }
}

/// Lower bound for `‖m₁ - m₂‖` in the dual of `C^{0,α}_0`: the largest
/// `|⟨m₁ - m₂, φ⟩|` over the dictionary, whose centers are the lattice plus
/// every atom of either measure.
pub fn dual_norm(m1: &DiscreteMeasure, m2: &DiscreteMeasure, grid: &Grid, alpha: f64, dict: &TestDictionary) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} not in (0, 1]")));
    }
    let l = grid.side();
    let mut centers: Vec<[f64; 2]> = Vec::new();
    for j in 0..dict.lattice {
        for i in 0..dict.lattice {
            centers.push([(i as f64 + 0.5) * l / dict.lattice as f64, (j as f64 + 0.5) * l / dict.lattice as f64]);
        }
    }
    centers.extend(m1.atoms().iter().chain(m2.atoms()).map(|(x, _)| *x));
    let mut best: f64 = 0.0;
    if grid.is_torus() {
        best = (m1.mass() - m2.mass()).abs();
    }
    for rho in dict.radii(grid) {
        let amp = 1.0 / (1.0 + rho.powf(-alpha));
        for &c in &centers {
            if !grid.is_torus() && (c[0].min(c[1]).min(l - c[0]).min(l - c[1]) < rho) {
                continue;
            }
            let phi = Cone { center: c, radius: rho };
            let v = amp * (m1.pair(grid, &phi) - m2.pair(grid, &phi)).abs();
            best = best.max(v);
        }
    }
    Ok(best)
}

pub const MU_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityRatio {
    pub max: f64,
    pub center: [f64; 2],
    pub radius: f64,
    /// Balls with `∫_B μ` below [`MU_FLOOR`], reported as ratio 0.
    pub empty_balls: usize,
}

/// `max_B |∫_B J| / ∫_B μ` over balls centered on every `stride`-th node.
pub fn density_ratio(j: &ScalarField, mu: &ScalarField, radii: &[f64], stride: usize) -> Result<DensityRatio> {
    if j.grid != mu.grid {
        return Err(Error::GridMismatch);
    }
    if mu.data.iter().any(|&m| m < 0.0) {
        return Err(Error::InvalidParameter("density_ratio needs μ ≥ 0".into()));
    }
    let g = j.grid;
    let stride = stride.max(1);
    let mut out = DensityRatio {
        max: 0.0,
        center: [0.0; 2],
        radius: 0.0,
        empty_balls: 0,
    };
    for jj in (0..g.nodes()).step_by(stride) {
        for ii in (0..g.nodes()).step_by(stride) {
            let c = g.point(ii, jj);
            for &r in radii {
                let nodes = ball_nodes(&g, c, r);
                let (mut sj, mut sm) = (0.0, 0.0);
                for (k, _) in nodes {
                    let w = point_weight(&g, k);
                    sj += w * j.data[k];
                    sm += w * mu.data[k];
                }
                if sm < MU_FLOOR {
                    out.empty_balls += 1;
                    continue;
                }
                let ratio = sj.abs() / sm;
                if ratio > out.max {
                    out.max = ratio;
                    out.center = c;
                    out.radius = r;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    pub rho_ann: f64,
    /// Largest displacement accepted as a continuation.
    pub max_jump: f64,
    /// Candidate distances closer than this are ties.
    pub tie: f64,
}

impl TrackOptions {
    /// `ρ_ann = 5ε`, `max_jump = ρ_ann`.
    pub fn for_eps(eps: f64) -> Self {
        Self {
            rho_ann: 5.0 * eps,
            max_jump: 5.0 * eps,
            tie: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TrackEvent {
    Continue { from: usize, to: usize },
    Annihilate { a: usize, b: usize, x: [f64; 2], partner: [f64; 2] },
    Spawn { a: usize, b: usize, x: [f64; 2], partner: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackStep {
    /// `matching[i] = Some(j)`: vortex `i` of `prev` continues as `j` of `next`.
    pub matching: Vec<Option<usize>>,
    pub events: Vec<TrackEvent>,
    /// Unexplained disappearances (indices into `prev`).
    pub lost: Vec<usize>,
    /// Unexplained appearances (indices into `next`).
    pub appeared: Vec<usize>,
    /// Some choice was decided by the lexicographic tie-break.
    pub ambiguous: bool,
}

fn greedy_pairs(
    candidates: &mut [(f64, usize, usize)],
    left: &mut [bool],
    right: &mut [bool],
    tie: f64,
    ambiguous: &mut bool,
) -> Vec<(usize, usize)> {
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = Vec::new();
    for (idx, &(d, a, b)) in candidates.iter().enumerate() {
        if left[a] || right[b] {
            continue;
        }
        if candidates[idx + 1..]
            .iter()
            .take_while(|c| c.0 - d <= tie)
            .any(|c| (c.1 == a || c.2 == b) && !left[c.1] && !right[c.2])
        {
            *ambiguous = true;
        }
        left[a] = true;
        right[b] = true;
        out.push((a, b));
    }
    out
}

/// Greedy nearest-neighbour matching between equal degrees, then opposite
/// pairs within `ρ_ann` among the leftovers become annihilations (in `prev`)
/// or spawns (in `next`).
pub fn track(prev: &VortexSet, next: &VortexSet, grid: &Grid, opts: &TrackOptions) -> TrackStep {
    let (p, q) = (&prev.vortices, &next.vortices);
    let mut ambiguous = false;
    let mut cand = Vec::new();
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            let d = grid.distance(a.pos(), b.pos());
            if a.degree == b.degree && d <= opts.max_jump {
                cand.push((d, i, j));
            }
        }
    }
    let (mut used_p, mut used_q) = (vec![false; p.len()], vec![false; q.len()]);
    let mut matching = vec![None; p.len()];
    let mut events = Vec::new();
    for (i, j) in greedy_pairs(&mut cand, &mut used_p, &mut used_q, opts.tie, &mut ambiguous) {
        matching[i] = Some(j);
        events.push(TrackEvent::Continue { from: i, to: j });
    }
    let opposite = |set: &[Vortex], used: &mut Vec<bool>, ambiguous: &mut bool| {
        let mut cand = Vec::new();
        for a in 0..set.len() {
            for b in a + 1..set.len() {
                if used[a] || used[b] || set[a].degree != -set[b].degree {
                    continue;
                }
                let d = grid.distance(set[a].pos(), set[b].pos());
                if d <= opts.rho_ann {
                    cand.push((d, a, b));
                }
            }
        }
        let mut l = used.clone();
        let mut r = used.clone();
        let mut out = Vec::new();
        cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (idx, &(d, a, b)) in cand.iter().enumerate() {
            if l[a] || r[a] || l[b] || r[b] {
                continue;
            }
            if cand[idx + 1..]
                .iter()
                .take_while(|c| c.0 - d <= opts.tie)
                .any(|c| [c.1, c.2].iter().any(|&v| v == a || v == b))
            {
                *ambiguous = true;
            }
            for v in [a, b] {
                l[v] = true;
                r[v] = true;
                used[v] = true;
            }
            out.push((a, b));
        }
        out
    };
    for (a, b) in opposite(p, &mut used_p, &mut ambiguous) {
        events.push(TrackEvent::Annihilate {
            a,
            b,
            x: p[a].pos(),
            partner: p[b].pos(),
        });
    }
    for (a, b) in opposite(q, &mut used_q, &mut ambiguous) {
        events.push(TrackEvent::Spawn {
            a,
            b,
            x: q[a].pos(),
            partner: q[b].pos(),
        });
    }
    TrackStep {
        matching,
        events,
        lost: (0..p.len()).filter(|&i| !used_p[i]).collect(),
        appeared: (0..q.len()).filter(|&j| !used_q[j]).collect(),
        ambiguous,
    }
}

/// Vortex tracks: `positions[frame][id]` is `None` once (or before) track
/// `id` is alive.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tracks {
    pub times: Vec<f64>,
    pub degrees: Vec<i32>,
    pub positions: Vec<Vec<Option<[f64; 2]>>>,
}

pub const VORTEX_HEADER: &str = "t,k,x,y,degree";
pub const EVENTS_HEADER: &str = "t,type,x,y,partner_x,partner_y";

impl Tracks {
    pub fn frames(&self) -> usize {
        self.times.len()
    }

    pub fn alive(&self, frame: usize) -> impl Iterator<Item = (usize, [f64; 2], i32)> + '_ {
        self.positions[frame]
            .iter()
            .enumerate()
            .filter_map(move |(k, p)| p.map(|p| (k, p, self.degrees[k])))
    }

    pub fn total_degree(&self, frame: usize) -> i64 {
        self.alive(frame).map(|(_, _, d)| d as i64).sum()
    }

    /// Distance between the first two alive tracks of a frame.
    pub fn pair_distance(&self, frame: usize, grid: &Grid) -> Option<f64> {
        let mut it = self.alive(frame);
        let (_, a, _) = it.next()?;
        let (_, b, _) = it.next()?;
        Some(grid.distance(a, b))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{VORTEX_HEADER}")?;
        for f in 0..self.frames() {
            for (k, p, d) in self.alive(f) {
                writeln!(w, "{},{},{},{},{}", self.times[f], k, p[0], p[1], d)?;
            }
        }
        Ok(())
    }
}

/// Incremental tracker producing [`Tracks`] and a timed event log.
#[derive(Clone, Debug)]
pub struct Tracker {
    grid: Grid,
    opts: TrackOptions,
    tracks: Tracks,
    last: Option<(VortexSet, Vec<usize>)>,
    pub events: Vec<(f64, TrackEvent)>,
    pub ambiguous_frames: usize,
    pub unexplained: usize,
}

impl Tracker {
    pub fn new(grid: Grid, opts: TrackOptions) -> Self {
        Self {
            grid,
            opts,
            tracks: Tracks::default(),
            last: None,
            events: Vec::new(),
            ambiguous_frames: 0,
            unexplained: 0,
        }
    }

    pub fn push(&mut self, t: f64, set: VortexSet) {
        let mut ids = vec![usize::MAX; set.len()];
        if let Some((prev, prev_ids)) = &self.last {
            let step = track(prev, &set, &self.grid, &self.opts);
            for (i, m) in step.matching.iter().enumerate() {
                if let Some(j) = m {
                    ids[*j] = prev_ids[i];
                }
            }
            if step.ambiguous {
                self.ambiguous_frames += 1;
            }
            self.unexplained += step.lost.len() + step.appeared.len();
            for e in step.events {
                if !matches!(e, TrackEvent::Continue { .. }) {
                    self.events.push((t, e));
                }
            }
        }
        for (j, id) in ids.iter_mut().enumerate() {
            if *id == usize::MAX {
                *id = self.tracks.degrees.len();
                self.tracks.degrees.push(set.vortices[j].degree);
            }
        }
        let mut frame = vec![None; self.tracks.degrees.len()];
        for (j, &id) in ids.iter().enumerate() {
            frame[id] = Some(set.vortices[j].pos());
        }
        for f in &mut self.tracks.positions {
            f.resize(self.tracks.degrees.len(), None);
        }
        self.tracks.times.push(t);
        self.tracks.positions.push(frame);
        self.last = Some((set, ids));
    }

    pub fn tracks(&self) -> &Tracks {
        &self.tracks
    }

    pub fn into_tracks(self) -> Tracks {
        self.tracks
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{EVENTS_HEADER}")?;
        for (t, e) in &self.events {
            let (kind, x, p) = match e {
                TrackEvent::Annihilate { x, partner, .. } => ("annihilate", x, partner),
                TrackEvent::Spawn { x, partner, .. } => ("spawn", x, partner),
                TrackEvent::Continue { .. } => continue,
            };
            writeln!(w, "{t},{kind},{},{},{},{}", x[0], x[1], p[0], p[1])?;
        }
        Ok(())
    }
}

/// Detects and tracks vortices every `every` steps of a run.
pub struct TrackingObserver {
    pub tracker: Tracker,
    pub r_merge: f64,
    pub every: usize,
    pub dt: f64,
    /// Stop the run once fewer than this many vortices are detected.
    pub stop_below: Option<usize>,
    pub stopped: bool,
}

impl TrackingObserver {
    pub fn new(grid: Grid, eps: f64, dt: f64, every: usize) -> Self {
        Self {
            tracker: Tracker::new(grid, TrackOptions::for_eps(eps)),
            r_merge: 3.0 * eps,
            every: every.max(1),
            dt,
            stop_below: None,
            stopped: false,
        }
    }
}

impl StepObserver for TrackingObserver {
    fn observe(&mut self, m: usize, u: &ComplexField, db: Option<f64>) -> Result<()> {
        if self.stopped || !(m % self.every == 0 || db.is_none()) {
            return Ok(());
        }
        let set = detect(u, self.r_merge);
        let count = set.len();
        self.tracker.push(m as f64 * self.dt, set);
        if self.stop_below.is_some_and(|k| count < k) {
            self.stopped = true;
        }
        Ok(())
    }

    fn finished(&self) -> bool {
        self.stopped
    }
}
