//! Balanced partition of training interactions into K shards.
//!
//! Three similarity-driven strategies share one balanced k-means style loop:
//!
//! * user-based (UBP): the unit is a user and all of its interactions,
//! * item-based (IBP): the unit is an item and all of its interactions,
//! * interaction-based (InBP): the unit is a single interaction, embedded as
//!   the pair (user vector, item vector).
//!
//! Each iteration computes every anchor-unit distance, sorts them globally
//! ascending (ties by shard index, then unit index) and scans the list
//! greedily: a unit joins the shard of the current entry if it is still
//! unassigned and that shard holds fewer than `t` units. Anchors then move to
//! the mean of their members. The loop stops once no anchor moves more than
//! the tolerance or after `max_iterations`.
//!
//! A uniform random partition is provided as a baseline.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{parse_index_pair, Dataset, Interaction};
use crate::error::{Error, Result};
use crate::models::EmbeddingTable;

/// Fixed user and item vectors used only to decide shard membership.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedEmbeddings {
    users: Array2<f64>,
    items: Array2<f64>,
}

impl PretrainedEmbeddings {
    pub fn new(users: Array2<f64>, items: Array2<f64>) -> Result<Self> {
        Ok(EmbeddingTable::new(users, items)?.into())
    }

    pub fn user_vecs(&self) -> &Array2<f64> {
        &self.users
    }

    pub fn item_vecs(&self) -> &Array2<f64> {
        &self.items
    }

    pub fn dim(&self) -> usize {
        self.users.ncols()
    }

    fn check_against(&self, data: &Dataset) -> Result<()> {
        for (expected, actual) in [
            (data.num_users(), self.users.nrows()),
            (data.num_items(), self.items.nrows()),
        ] {
            if expected != actual {
                return Err(Error::DimensionMismatch { expected, actual });
            }
        }
        Ok(())
    }

    pub fn to_table(&self) -> EmbeddingTable {
        EmbeddingTable::new(self.users.clone(), self.items.clone()).expect("validated on build")
    }
}

impl From<EmbeddingTable> for PretrainedEmbeddings {
    fn from(table: EmbeddingTable) -> Self {
        let (users, items) = table.into_parts();
        PretrainedEmbeddings { users, items }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Ubp,
    Ibp,
    Inbp,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Ubp, Strategy::Ibp, Strategy::Inbp, Strategy::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ubp => "ubp",
            Strategy::Ibp => "ibp",
            Strategy::Inbp => "inbp",
            Strategy::Random => "random",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        self != Strategy::Random
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ubp" | "user" => Ok(Strategy::Ubp),
            "ibp" | "item" => Ok(Strategy::Ibp),
            "inbp" | "interaction" => Ok(Strategy::Inbp),
            "random" => Ok(Strategy::Random),
            other => Err(Error::config(format!(
                "unknown partition strategy `{other}` (expected ubp, ibp, inbp or random)"
            ))),
        }
    }
}

/// How the user-side and item-side distances combine for InBP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMetric {
    #[default]
    Product,
    /// Experimental alternative; not the default.
    Sum,
}

impl FromStr for PairMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(PairMetric::Product),
            "sum" => Ok(PairMetric::Sum),
            other => Err(Error::config(format!("unknown pair metric `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub num_shards: usize,
    /// Maximum units per shard; `None` means `ceil(units / K)`.
    pub capacity: Option<usize>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub pair_metric: PairMetric,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            num_shards: 10,
            capacity: None,
            max_iterations: 50,
            tolerance: 1e-6,
            pair_metric: PairMetric::Product,
            seed: 42,
        }
    }
}

impl PartitionConfig {
    pub fn with_shards(num_shards: usize) -> Self {
        PartitionConfig {
            num_shards,
            ..Self::default()
        }
    }

    /// Effective capacity for `units` members, checked for feasibility.
    pub fn capacity_for(&self, units: usize) -> Result<usize> {
        if self.num_shards == 0 {
            return Err(Error::config("number of shards must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        let required = units.div_ceil(self.num_shards);
        let capacity = self.capacity.unwrap_or(required);
        if capacity < required {
            return Err(Error::InfeasibleCapacity {
                units,
                shards: self.num_shards,
                capacity,
                required,
            });
        }
        Ok(capacity)
    }
}

/// Shard centers. User-based anchors live in user space, item-based in item
/// space, interaction-based anchors carry one center in each.
#[derive(Clone, Debug, PartialEq)]
pub struct Anchors {
    pub user_centers: Option<Array2<f64>>,
    pub item_centers: Option<Array2<f64>>,
}

impl Anchors {
    pub fn num_shards(&self) -> usize {
        self.user_centers
            .as_ref()
            .or(self.item_centers.as_ref())
            .map_or(0, |c| c.nrows())
    }

    fn spaces(&self) -> Vec<&Array2<f64>> {
        self.user_centers.iter().chain(self.item_centers.iter()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ShardAssignment {
    kind: Strategy,
    capacity: usize,
    seed: u64,
    shards: Vec<Vec<Interaction>>,
    member_of: HashMap<Interaction, u32>,
    anchors: Option<Anchors>,
    iterations: usize,
}

impl PartialEq for ShardAssignment {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.capacity == other.capacity
            && self.seed == other.seed
            && self.shards == other.shards
    }
}

impl ShardAssignment {
    fn from_shards(
        kind: Strategy,
        capacity: usize,
        seed: u64,
        mut shards: Vec<Vec<Interaction>>,
        anchors: Option<Anchors>,
        iterations: usize,
    ) -> Self {
        let mut member_of = HashMap::with_capacity(shards.iter().map(Vec::len).sum());
        for (i, shard) in shards.iter_mut().enumerate() {
            shard.sort_unstable();
            for &y in shard.iter() {
                member_of.insert(y, i as u32);
            }
        }
        ShardAssignment {
            kind,
            capacity,
            seed,
            shards,
            member_of,
            anchors,
            iterations,
        }
    }

    pub fn kind(&self) -> Strategy {
        self.kind
    }

    pub fn num_shards(&self) -> usize {
        self.shards.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Interactions of shard `i`, sorted.
    pub fn shard(&self, i: usize) -> &[Interaction] {
        &self.shards[i]
    }

    pub fn shards(&self) -> &[Vec<Interaction>] {
        &self.shards
    }

    /// Final anchors, when the assignment was computed rather than loaded.
    pub fn anchors(&self) -> Option<&Anchors> {
        self.anchors.as_ref()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn len(&self) -> usize {
        self.member_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_of.is_empty()
    }

    pub fn locate_shard(&self, y: Interaction) -> Result<usize> {
        self.member_of
            .get(&y)
            .map(|&s| s as usize)
            .ok_or(Error::InteractionNotFound(y))
    }

    /// Units per shard in this strategy's counting unit: distinct users for
    /// UBP, distinct items for IBP, interactions otherwise.
    pub fn member_counts(&self) -> Vec<usize> {
        self.shards
            .iter()
            .map(|s| {
                let mut keys: Vec<u32> = match self.kind {
                    Strategy::Ubp => s.iter().map(|y| y.user).collect(),
                    Strategy::Ibp => s.iter().map(|y| y.item).collect(),
                    _ => return s.len(),
                };
                keys.sort_unstable();
                keys.dedup();
                keys.len()
            })
            .collect()
    }

    /// Shard `i` as a dataset over the index space of `train`.
    pub fn shard_dataset(&self, i: usize, train: &Dataset) -> Result<Dataset> {
        if i >= self.shards.len() {
            return Err(Error::OutOfRange {
                what: "shard",
                index: i,
                len: self.shards.len(),
            });
        }
        train.subset(self.shards[i].iter().copied())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(
            out,
            "{} {} {} {}",
            self.kind,
            self.num_shards(),
            self.capacity,
            self.seed
        )
        .map_err(io)?;
        for (i, shard) in self.shards.iter().enumerate() {
            for y in shard {
                writeln!(out, "{}\t{}\t{i}", y.user, y.item).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let reader = BufReader::new(File::open(path).map_err(io)?);
        let mut lines = reader.lines();
        let parse_err = |line: usize, message: &str| Error::Parse {
            path: path.display().to_string(),
            line,
            message: message.to_owned(),
        };
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header"))?
            .map_err(io)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(1, "expected `kind K t seed`"));
        }
        let kind: Strategy = fields[0].parse()?;
        let num = |s: &str| s.parse::<u64>().map_err(|_| parse_err(1, "non-numeric header field"));
        let k = num(fields[1])? as usize;
        let capacity = num(fields[2])? as usize;
        let seed = num(fields[3])?;
        let mut shards = vec![Vec::new(); k];
        for (no, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let (pair, shard) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse_err(no + 2, "expected user<TAB>item<TAB>shard"))?;
            let y = parse_index_pair(pair, '\t')
                .ok_or_else(|| parse_err(no + 2, "bad user/item indices"))?;
            let s: usize = shard
                .trim()
                .parse()
                .map_err(|_| parse_err(no + 2, "bad shard index"))?;
            if s >= k {
                return Err(parse_err(no + 2, "shard index out of range"));
            }
            shards[s].push(y);
        }
        Ok(Self::from_shards(kind, capacity, seed, shards, None, 0))
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_vector(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("embedding vector"));
    }
    Ok(())
}

/// Euclidean distance between an anchor center and a user (or item) vector.
pub fn user_distance(anchor_center: &[f64], vec: &[f64]) -> Result<f64> {
    check_vector(vec, anchor_center.len())?;
    check_vector(anchor_center, anchor_center.len())?;
    Ok(euclidean(anchor_center, vec))
}

/// `‖p̄_a − p̄_u‖ · ‖q̄_a − q̄_v‖` for an anchor pair and an interaction.
pub fn interaction_distance(
    anchor: (&[f64], &[f64]),
    user_vec: &[f64],
    item_vec: &[f64],
) -> Result<f64> {
    let d = anchor.0.len();
    for v in [anchor.0, anchor.1, user_vec, item_vec] {
        check_vector(v, d)?;
    }
    Ok(PairMetric::Product.combine(euclidean(anchor.0, user_vec), euclidean(anchor.1, item_vec)))
}

impl PairMetric {
    fn combine(self, du: f64, dv: f64) -> f64 {
        match self {
            PairMetric::Product => du * dv,
            PairMetric::Sum => du + dv,
        }
    }
}

/// Units to partition: each unit indexes one row in each embedding space.
struct Units<'a> {
    spaces: Vec<(&'a Array2<f64>, Vec<u32>)>,
    metric: PairMetric,
}

impl Units<'_> {
    fn len(&self) -> usize {
        self.spaces[0].1.len()
    }

    fn initial_anchors(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<Array2<f64>> {
        let picks = index::sample(rng, self.len(), k).into_vec();
        self.spaces
            .iter()
            .map(|(vecs, rows)| {
                let mut c = Array2::zeros((k, vecs.ncols()));
                for (i, &p) in picks.iter().enumerate() {
                    c.row_mut(i).assign(&vecs.row(rows[p] as usize));
                }
                c
            })
            .collect()
    }

    /// Distance from every anchor to every unit, shard-major.
    fn distances(&self, anchors: &[Array2<f64>]) -> Vec<Vec<f64>> {
        // Distances per embedding row, shared by all units that use the row.
        let per_space: Vec<Vec<Vec<f64>>> = self
            .spaces
            .iter()
            .zip(anchors)
            .map(|((vecs, _), centers)| {
                centers
                    .outer_iter()
                    .map(|c| {
                        let c = c.to_vec();
                        (0..vecs.nrows())
                            .into_par_iter()
                            .map(|r| euclidean(&c, vecs.row(r).as_slice().expect("standard layout")))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (0..anchors[0].nrows())
            .map(|i| {
                (0..self.len())
                    .map(|u| {
                        let first = per_space[0][i][self.spaces[0].1[u] as usize];
                        match per_space.get(1) {
                            None => first,
                            Some(second) => self
                                .metric
                                .combine(first, second[i][self.spaces[1].1[u] as usize]),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Member means per space; an empty shard keeps its previous center.
    fn means(&self, assign: &[u32], previous: &[Array2<f64>]) -> Vec<Array2<f64>> {
        let k = previous[0].nrows();
        let mut counts = vec![0usize; k];
        for &s in assign {
            counts[s as usize] += 1;
        }
        self.spaces
            .iter()
            .zip(previous)
            .map(|((vecs, rows), prev)| {
                let mut sums = Array2::<f64>::zeros(prev.raw_dim());
                for (u, &s) in assign.iter().enumerate() {
                    let mut row = sums.row_mut(s as usize);
                    row += &vecs.row(rows[u] as usize);
                }
                for (i, &c) in counts.iter().enumerate() {
                    if c == 0 {
                        sums.row_mut(i).assign(&prev.row(i));
                    } else {
                        sums.row_mut(i).mapv_inplace(|x| x / c as f64);
                    }
                }
                sums
            })
            .collect()
    }
}

/// Greedy capacity-bounded scan over the globally sorted distance list.
fn greedy_assign(dist: &[Vec<f64>], capacity: usize) -> Vec<u32> {
    let k = dist.len();
    let units = dist[0].len();
    let mut entries: Vec<(f64, u32, u32)> = Vec::with_capacity(k * units);
    for (i, row) in dist.iter().enumerate() {
        entries.extend(row.iter().enumerate().map(|(u, &d)| (d, i as u32, u as u32)));
    }
    entries.par_sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut assign = vec![u32::MAX; units];
    let mut fill = vec![0usize; k];
    let mut placed = 0;
    for (_, s, u) in entries {
        if assign[u as usize] == u32::MAX && fill[s as usize] < capacity {
            assign[u as usize] = s;
            fill[s as usize] += 1;
            placed += 1;
            if placed == units {
                break;
            }
        }
    }
    assign
}

fn max_movement(a: &[Array2<f64>], b: &[Array2<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            x.outer_iter().zip(y.outer_iter()).map(|(r, s)| {
                r.iter()
                    .zip(s.iter())
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt()
            })
        })
        .fold(0.0, f64::max)
}

struct Balanced {
    assign: Vec<u32>,
    anchors: Vec<Array2<f64>>,
    iterations: usize,
}

fn balanced_loop(
    units: &Units<'_>,
    mut anchors: Vec<Array2<f64>>,
    capacity: usize,
    cfg: &PartitionConfig,
) -> Balanced {
    let mut assign = Vec::new();
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations {
        iterations = it;
        assign = greedy_assign(&units.distances(&anchors), capacity);
        let next = units.means(&assign, &anchors);
        let moved = max_movement(&anchors, &next);
        anchors = next;
        log::debug!("partition iteration {it}: max anchor movement {moved:.3e}");
        if moved < cfg.tolerance {
            break;
        }
    }
    Balanced {
        assign,
        anchors,
        iterations,
    }
}

fn active(count: usize, degree: impl Fn(u32) -> usize) -> Vec<u32> {
    (0..count as u32).filter(|&x| degree(x) > 0).collect()
}

fn units_for<'a>(
    kind: Strategy,
    train: &Dataset,
    emb: &'a PretrainedEmbeddings,
    metric: PairMetric,
) -> Units<'a> {
    let spaces = match kind {
        Strategy::Ubp => vec![(
            &emb.users,
            active(train.num_users(), |u| train.user_items(u).len()),
        )],
        Strategy::Ibp => vec![(
            &emb.items,
            active(train.num_items(), |v| train.item_users(v).len()),
        )],
        Strategy::Inbp => vec![
            (&emb.users, train.interactions().iter().map(|y| y.user).collect()),
            (&emb.items, train.interactions().iter().map(|y| y.item).collect()),
        ],
        Strategy::Random => unreachable!("random partition has no units"),
    };
    Units { spaces, metric }
}

fn to_anchors(kind: Strategy, mut centers: Vec<Array2<f64>>) -> Anchors {
    match kind {
        Strategy::Ubp => Anchors {
            user_centers: centers.pop(),
            item_centers: None,
        },
        Strategy::Ibp => Anchors {
            user_centers: None,
            item_centers: centers.pop(),
        },
        _ => {
            let items = centers.pop();
            Anchors {
                user_centers: centers.pop(),
                item_centers: items,
            }
        }
    }
}

fn run_balanced(
    kind: Strategy,
    train: &Dataset,
    emb: &PretrainedEmbeddings,
    cfg: &PartitionConfig,
    start: Option<&Anchors>,
) -> Result<ShardAssignment> {
    emb.check_against(train)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let units = units_for(kind, train, emb, cfg.pair_metric);
    let capacity = cfg.capacity_for(units.len())?;
    let k = cfg.num_shards;
    if k > units.len() {
        return Err(Error::config(format!(
            "{k} shards requested but only {} {kind} units exist",
            units.len()
        )));
    }
    let initial = match start {
        Some(a) => {
            let spaces: Vec<Array2<f64>> = a.spaces().into_iter().cloned().collect();
            let expected = units.spaces.len();
            if spaces.len() != expected
                || spaces.iter().any(|c| c.nrows() != k || c.ncols() != emb.dim())
                || to_anchors(kind, spaces.clone()) != *a
            {
                return Err(Error::config(format!(
                    "starting anchors do not fit a {kind} partition with {k} shards"
                )));
            }
            spaces
        }
        None => units.initial_anchors(k, &mut ChaCha8Rng::seed_from_u64(cfg.seed)),
    };
    let out = balanced_loop(&units, initial, capacity, cfg);

    let mut shards = vec![Vec::new(); k];
    match kind {
        Strategy::Ubp => {
            for (&u, &s) in units.spaces[0].1.iter().zip(&out.assign) {
                shards[s as usize].extend(train.user_items(u).iter().map(|&v| Interaction::new(u, v)));
            }
        }
        Strategy::Ibp => {
            for (&v, &s) in units.spaces[0].1.iter().zip(&out.assign) {
                shards[s as usize].extend(train.item_users(v).iter().map(|&u| Interaction::new(u, v)));
            }
        }
        _ => {
            for (&y, &s) in train.interactions().iter().zip(&out.assign) {
                shards[s as usize].push(y);
            }
        }
    }
    Ok(ShardAssignment::from_shards(
        kind,
        capacity,
        cfg.seed,
        shards,
        Some(to_anchors(kind, out.anchors)),
        out.iterations,
    ))
}

pub fn ubp_partition(
    train: &Dataset,
    emb: &PretrainedEmbeddings,
    cfg: &PartitionConfig,
) -> Result<ShardAssignment> {
    run_balanced(Strategy::Ubp, train, emb, cfg, None)
}

pub fn ibp_partition(
    train: &Dataset,
    emb: &PretrainedEmbeddings,
    cfg: &PartitionConfig,
) -> Result<ShardAssignment> {
    run_balanced(Strategy::Ibp, train, emb, cfg, None)
}

pub fn inbp_partition(
    train: &Dataset,
    emb: &PretrainedEmbeddings,
    cfg: &PartitionConfig,
) -> Result<ShardAssignment> {
    run_balanced(Strategy::Inbp, train, emb, cfg, None)
}

/// Runs a balanced strategy starting from the given anchors instead of
/// randomly chosen ones.
pub fn partition_from_anchors(
    kind: Strategy,
    train: &Dataset,
    emb: &PretrainedEmbeddings,
    anchors: &Anchors,
    cfg: &PartitionConfig,
) -> Result<ShardAssignment> {
    if kind == Strategy::Random {
        return Err(Error::config("random partition has no anchors"));
    }
    run_balanced(kind, train, emb, cfg, Some(anchors))
}

/// Shuffles the interactions under the seed and deals them round-robin.
pub fn random_partition(train: &Dataset, cfg: &PartitionConfig) -> Result<ShardAssignment> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let capacity = cfg.capacity_for(train.len())?;
    let k = cfg.num_shards;
    let mut order = train.interactions().to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut shards = vec![Vec::new(); k];
    for (j, y) in order.into_iter().enumerate() {
        shards[j % k].push(y);
    }
    Ok(ShardAssignment::from_shards(
        Strategy::Random,
        capacity,
        cfg.seed,
        shards,
        None,
        0,
    ))
}

/// Dispatches on `strategy`; `emb` may be `None` only for the random baseline.
pub fn partition(
    strategy: Strategy,
    train: &Dataset,
    emb: Option<&PretrainedEmbeddings>,
    cfg: &PartitionConfig,
) -> Result<ShardAssignment> {
    if strategy == Strategy::Random {
        return random_partition(train, cfg);
    }
    let emb = emb.ok_or_else(|| {
        Error::config(format!("{strategy} partition needs pre-trained embeddings"))
    })?;
    run_balanced(strategy, train, emb, cfg, None)
}

pub fn locate_shard(assignment: &ShardAssignment, y: Interaction) -> Result<usize> {
    assignment.locate_shard(y)
}
