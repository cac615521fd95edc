//! Implicit-feedback interaction data.
//!
//! A [`Dataset`] is the binary user-item matrix stored as a sorted list of
//! `(user, item)` pairs plus both adjacency directions. Users and items are
//! addressed by dense 0-based indices; the original tokens from the input file
//! live in shared [`IdMap`]s so that train/validation/test splits and shard
//! subsets all agree on the index space.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed user-item pair (`y_uv = 1`).
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
}

impl Interaction {
    pub fn new(user: u32, item: u32) -> Self {
        Interaction { user, item }
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.user, self.item)
    }
}

/// Bidirectional mapping between original tokens and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    /// Map whose tokens are the decimal indices themselves.
    pub fn identity(len: usize) -> Self {
        let mut map = IdMap::default();
        for i in 0..len {
            map.get_or_insert(&i.to_string());
        }
        map
    }

    pub fn get_or_insert(&mut self, token: &str) -> u32 {
        if let Some(&idx) = self.index.get(token) {
            return idx;
        }
        let idx = self.ids.len() as u32;
        self.ids.push(token.to_owned());
        self.index.insert(token.to_owned(), idx);
        idx
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.ids.get(index as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Writes `original_id\tindex` lines.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (i, id) in self.ids.iter().enumerate() {
            writeln!(out, "{id}\t{i}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut map = IdMap::default();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: &str| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: message.to_owned(),
            };
            let (token, idx) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse_err("expected `original_id<TAB>index`"))?;
            let idx: usize = idx.parse().map_err(|_| parse_err("bad index"))?;
            if idx != map.len() {
                return Err(parse_err("indices must be contiguous and ordered"));
            }
            map.get_or_insert(token);
        }
        Ok(map)
    }
}

/// Binary interaction matrix with user and item adjacency lists.
#[derive(Debug, Clone)]
pub struct Dataset {
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    interactions: Vec<Interaction>,
    user_adj: Vec<Vec<u32>>,
    item_adj: Vec<Vec<u32>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.num_users() == other.num_users()
            && self.num_items() == other.num_items()
            && self.interactions == other.interactions
    }
}

impl Dataset {
    /// Builds a dataset over `num_users × num_items` with identity id maps.
    pub fn from_interactions(
        num_users: usize,
        num_items: usize,
        interactions: impl IntoIterator<Item = Interaction>,
    ) -> Result<Self> {
        Self::with_maps(
            Arc::new(IdMap::identity(num_users)),
            Arc::new(IdMap::identity(num_items)),
            interactions,
        )
    }

    /// Builds a dataset sharing existing id maps. Duplicates are dropped.
    pub fn with_maps(
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        interactions: impl IntoIterator<Item = Interaction>,
    ) -> Result<Self> {
        let (m, n) = (users.len(), items.len());
        let mut list: Vec<Interaction> = interactions.into_iter().collect();
        for y in &list {
            if y.user as usize >= m {
                return Err(Error::OutOfRange {
                    what: "user",
                    index: y.user as usize,
                    len: m,
                });
            }
            if y.item as usize >= n {
                return Err(Error::OutOfRange {
                    what: "item",
                    index: y.item as usize,
                    len: n,
                });
            }
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self::from_sorted(users, items, list))
    }

    fn from_sorted(users: Arc<IdMap>, items: Arc<IdMap>, interactions: Vec<Interaction>) -> Self {
        let mut user_adj = vec![Vec::new(); users.len()];
        let mut item_adj = vec![Vec::new(); items.len()];
        // Sorted by (user, item), so both adjacency directions come out sorted.
        for y in &interactions {
            user_adj[y.user as usize].push(y.item);
            item_adj[y.item as usize].push(y.user);
        }
        Dataset {
            users,
            items,
            interactions,
            user_adj,
            item_adj,
        }
    }

    /// A dataset over the same index space holding only `interactions`.
    pub fn subset(&self, interactions: impl IntoIterator<Item = Interaction>) -> Result<Self> {
        Self::with_maps(self.users.clone(), self.items.clone(), interactions)
    }

    /// Same index space, no interactions.
    pub fn empty_like(&self) -> Self {
        Self::from_sorted(self.users.clone(), self.items.clone(), Vec::new())
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    /// All interactions, sorted by `(user, item)`.
    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn user_items(&self, user: u32) -> &[u32] {
        &self.user_adj[user as usize]
    }

    pub fn item_users(&self, item: u32) -> &[u32] {
        &self.item_adj[item as usize]
    }

    pub fn user_ids(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn item_ids(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn contains(&self, y: Interaction) -> bool {
        self.user_adj
            .get(y.user as usize)
            .is_some_and(|items| items.binary_search(&y.item).is_ok())
    }

    /// Users with at least one interaction.
    pub fn active_users(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.num_users() as u32).filter(|&u| !self.user_adj[u as usize].is_empty())
    }

    /// Returns a copy without `y`. Fails if `y` is absent.
    pub fn remove_interaction(&self, y: Interaction) -> Result<Dataset> {
        let mut out = self.clone();
        out.remove_in_place(y)?;
        Ok(out)
    }

    pub fn remove_in_place(&mut self, y: Interaction) -> Result<()> {
        let pos = self
            .interactions
            .binary_search(&y)
            .map_err(|_| Error::InteractionNotFound(y))?;
        self.interactions.remove(pos);
        let items = &mut self.user_adj[y.user as usize];
        if let Ok(i) = items.binary_search(&y.item) {
            items.remove(i);
        }
        let users = &mut self.item_adj[y.item as usize];
        if let Ok(i) = users.binary_search(&y.user) {
            users.remove(i);
        }
        Ok(())
    }

    /// Returns a copy with `y` added; adding an existing pair is a no-op.
    pub fn add_interaction(&self, y: Interaction) -> Result<Dataset> {
        if y.user as usize >= self.num_users() || y.item as usize >= self.num_items() {
            return Err(Error::OutOfRange {
                what: "interaction",
                index: y.user.max(y.item) as usize,
                len: self.num_users().min(self.num_items()),
            });
        }
        let mut out = self.clone();
        if let Err(pos) = out.interactions.binary_search(&y) {
            out.interactions.insert(pos, y);
            let items = &mut out.user_adj[y.user as usize];
            let i = items.binary_search(&y.item).unwrap_err();
            items.insert(i, y.item);
            let users = &mut out.item_adj[y.item as usize];
            let j = users.binary_search(&y.user).unwrap_err();
            users.insert(j, y.user);
        }
        Ok(out)
    }

    /// Canonical dump: sorted `user\titem` index lines.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for y in &self.interactions {
            writeln!(out, "{}\t{}", y.user, y.item).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a canonical dump written by [`Dataset::write_tsv`].
    pub fn read_tsv(path: &Path, users: Arc<IdMap>, items: Arc<IdMap>) -> Result<Dataset> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut list = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            list.push(parse_index_pair(&line, '\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: "expected `user<TAB>item` indices".into(),
            })?);
        }
        Self::with_maps(users, items, list)
    }
}

pub(crate) fn parse_index_pair(line: &str, sep: char) -> Option<Interaction> {
    let mut parts = line.split(sep).map(str::trim);
    let user = parts.next()?.parse().ok()?;
    let item = parts.next()?.parse().ok()?;
    Some(Interaction { user, item })
}

/// Column separator for raw interaction logs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Separator {
    /// Detect from the first data line: `::`, then tab, then comma.
    #[default]
    Auto,
    DoubleColon,
    Tab,
    Comma,
}

impl Separator {
    fn as_str(self) -> &'static str {
        match self {
            Separator::DoubleColon => "::",
            Separator::Tab => "\t",
            Separator::Comma => ",",
            Separator::Auto => unreachable!("auto separator must be resolved"),
        }
    }

    fn detect(line: &str) -> Option<Separator> {
        if line.contains("::") {
            Some(Separator::DoubleColon)
        } else if line.contains('\t') {
            Some(Separator::Tab)
        } else if line.contains(',') {
            Some(Separator::Comma)
        } else {
            None
        }
    }
}

impl std::str::FromStr for Separator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Separator::Auto),
            "::" | "doublecolon" | "dat" => Ok(Separator::DoubleColon),
            "tab" | "tsv" | "\\t" => Ok(Separator::Tab),
            "comma" | "csv" | "," => Ok(Separator::Comma),
            other => Err(Error::config(format!("unknown separator `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadOptions {
    pub separator: Separator,
    /// Rows whose rating is below this are dropped; without it every row is a positive.
    pub rating_threshold: Option<f64>,
    /// Skip the first non-empty line.
    pub has_header: bool,
}

/// Reads `user<sep>item[<sep>rating[<sep>timestamp]]` rows into a binary dataset.
///
/// Indices are assigned in first-appearance order; duplicate pairs collapse.
pub fn load_interactions(path: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(BufReader::new(file), &path.display().to_string(), opts)
}

pub fn parse_interactions(
    reader: impl BufRead,
    source: &str,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let mut users = IdMap::default();
    let mut items = IdMap::default();
    let mut list = Vec::new();
    let mut sep = opts.separator;
    let mut header_pending = opts.has_header;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_owned(),
            line: lineno,
            message,
        };
        if sep == Separator::Auto {
            sep = Separator::detect(line)
                .ok_or_else(|| parse_err("cannot detect column separator".into()))?;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let mut cols = line.split(sep.as_str()).map(str::trim);
        let user = cols.next().filter(|s| !s.is_empty());
        let item = cols.next().filter(|s| !s.is_empty());
        let (Some(user), Some(item)) = (user, item) else {
            return Err(parse_err("expected at least user and item columns".into()));
        };
        let rating = match cols.next() {
            Some(r) => Some(
                r.parse::<f64>()
                    .map_err(|_| parse_err(format!("rating `{r}` is not a number")))?,
            ),
            None => None,
        };
        if let Some(threshold) = opts.rating_threshold {
            match rating {
                Some(r) if r < threshold => continue,
                Some(_) => {}
                None => return Err(parse_err("rating column required by threshold".into())),
            }
        }
        let u = users.get_or_insert(user);
        let v = items.get_or_insert(item);
        list.push(Interaction::new(u, v));
    }

    if list.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::with_maps(Arc::new(users), Arc::new(items), list)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            validation_fraction_of_train: 0.1,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

// Absorbs representation error such as 10 * (1 - 0.8) = 1.9999999999999996.
const ROUNDING_SLACK: f64 = 1e-9;

/// Sizes `(train, validation, test)` for `total` interactions.
///
/// Test and validation are floored; a positive validation fraction always
/// yields at least one validation interaction. The remainder is train.
pub fn split_sizes(total: usize, spec: &SplitSpec) -> Result<(usize, usize, usize)> {
    let tf = spec.train_fraction;
    let vf = spec.validation_fraction_of_train;
    if !(tf > 0.0 && tf < 1.0) {
        return Err(Error::config(format!("train_fraction {tf} must be in (0, 1)")));
    }
    if !(0.0..1.0).contains(&vf) {
        return Err(Error::config(format!(
            "validation_fraction_of_train {vf} must be in [0, 1)"
        )));
    }
    let test = (total as f64 * (1.0 - tf) + ROUNDING_SLACK).floor() as usize;
    if test == 0 {
        return Err(Error::config("split leaves the test set empty"));
    }
    let rest = total - test;
    let mut val = (rest as f64 * vf + ROUNDING_SLACK).floor() as usize;
    if vf > 0.0 && val == 0 {
        val = 1;
    }
    if val >= rest {
        return Err(Error::config("split leaves the train set empty"));
    }
    Ok((rest - val, val, test))
}

/// Random global split of interactions into train/validation/test.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (_, n_val, n_test) = split_sizes(dataset.len(), spec)?;
    let mut order: Vec<Interaction> = dataset.interactions().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let test = dataset.subset(order[..n_test].iter().copied())?;
    let validation = dataset.subset(order[n_test..n_test + n_val].iter().copied())?;
    let train = dataset.subset(order[n_test + n_val..].iter().copied())?;
    Ok(Split {
        train,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Dataset> {
        parse_interactions(Cursor::new(text), "mem", &LoadOptions::default())
    }

    #[test]
    fn three_line_file() {
        let d = parse("a\tx\na\ty\nb\tx\n").unwrap();
        assert_eq!((d.num_users(), d.num_items(), d.len()), (2, 2, 3));
        assert_eq!(d.user_ids().token(1), Some("b"));
        assert_eq!(d.item_ids().index_of("y"), Some(1));
    }

    #[test]
    fn duplicates_collapse() {
        let d = parse("a,x\na,y\nb,x\na,x\n").unwrap();
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn movielens_style_rows() {
        let d = parse("1::1193::5::978300760\n1::661::3::978302109\n2::1193::4::978298413\n")
            .unwrap();
        assert_eq!((d.num_users(), d.num_items(), d.len()), (2, 2, 3));
    }

    #[test]
    fn rating_threshold_drops_rows() {
        let opts = LoadOptions {
            rating_threshold: Some(4.0),
            ..Default::default()
        };
        let d = parse_interactions(Cursor::new("1::10::5\n1::11::3\n2::10::4\n"), "mem", &opts)
            .unwrap();
        assert_eq!(d.len(), 2);
        // Item 11 is never seen, so it gets no index.
        assert_eq!(d.num_items(), 1);
    }

    #[test]
    fn malformed_row_names_line() {
        let err = parse("a\tx\nlonely\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse("a,x,5\nb,y,high\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse("\n\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn header_is_skipped() {
        let opts = LoadOptions {
            has_header: true,
            ..Default::default()
        };
        let d = parse_interactions(
            Cursor::new("userId,movieId,rating\n1,2,3.5\n"),
            "mem",
            &opts,
        )
        .unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn remove_then_add_round_trips() {
        let d = parse("a\tx\nb\tx\n").unwrap();
        let y = Interaction::new(0, 0);
        let removed = d.remove_interaction(y).unwrap();
        assert_eq!(removed.interactions(), &[Interaction::new(1, 0)]);
        // User a keeps its index with an empty adjacency.
        assert_eq!(removed.num_users(), 2);
        assert!(removed.user_items(0).is_empty());
        assert_eq!(removed.item_users(0), &[1]);
        assert_eq!(removed.add_interaction(y).unwrap(), d);
        assert!(matches!(
            removed.remove_interaction(y),
            Err(Error::InteractionNotFound(_))
        ));
    }

    #[test]
    fn split_sizes_floor_rule() {
        assert_eq!(split_sizes(10, &SplitSpec::default()).unwrap(), (7, 1, 2));
        assert_eq!(split_sizes(100, &SplitSpec::default()).unwrap(), (72, 8, 20));
        let no_test = SplitSpec {
            train_fraction: 0.95,
            validation_fraction_of_train: 0.0,
            seed: 0,
        };
        assert!(split_sizes(10, &no_test).is_err());
        let all_train = SplitSpec {
            train_fraction: 1.0,
            validation_fraction_of_train: 0.0,
            seed: 0,
        };
        assert!(split_sizes(10, &all_train).is_err());
    }

    #[test]
    fn split_of_ten_is_deterministic() {
        let d = Dataset::from_interactions(5, 5, (0..10).map(|i| Interaction::new(i / 2, i % 5)))
            .unwrap();
        let a = split(&d, &SplitSpec::default()).unwrap();
        let b = split(&d, &SplitSpec::default()).unwrap();
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (7, 1, 2));
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation, b.validation);
        assert_eq!(a.test, b.test);
        assert!(Arc::ptr_eq(a.train.user_ids(), d.user_ids()));
    }

    #[test]
    fn dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = parse("a\tx\nb\ty\nb\tx\n").unwrap();
        d.write_tsv(&dir.path().join("d.tsv")).unwrap();
        d.user_ids().write(&dir.path().join("u.idx")).unwrap();
        d.item_ids().write(&dir.path().join("i.idx")).unwrap();
        let users = Arc::new(IdMap::read(&dir.path().join("u.idx")).unwrap());
        let items = Arc::new(IdMap::read(&dir.path().join("i.idx")).unwrap());
        assert_eq!(&*users, &**d.user_ids());
        let back = Dataset::read_tsv(&dir.path().join("d.tsv"), users, items).unwrap();
        assert_eq!(back, d);
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..12, 1usize..12).prop_flat_map(|(m, n)| {
            proptest::collection::vec((0..m as u32, 0..n as u32), 1..60).prop_map(move |pairs| {
                Dataset::from_interactions(
                    m,
                    n,
                    pairs.into_iter().map(|(u, v)| Interaction::new(u, v)),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn adjacency_is_transpose_of_interactions(d in arb_dataset()) {
            for u in 0..d.num_users() as u32 {
                for v in 0..d.num_items() as u32 {
                    let y = Interaction::new(u, v);
                    let in_list = d.interactions().contains(&y);
                    prop_assert_eq!(d.user_items(u).contains(&v), in_list);
                    prop_assert_eq!(d.item_users(v).contains(&u), in_list);
                    prop_assert_eq!(d.contains(y), in_list);
                }
            }
        }

        #[test]
        fn split_partitions_interactions(d in arb_dataset(), seed in any::<u64>()) {
            let spec = SplitSpec { train_fraction: 0.6, validation_fraction_of_train: 0.2, seed };
            if let Ok(s) = split(&d, &spec) {
                let mut all: Vec<_> = s.train.interactions().iter()
                    .chain(s.validation.interactions())
                    .chain(s.test.interactions())
                    .copied()
                    .collect();
                let total = all.len();
                all.sort_unstable();
                all.dedup();
                prop_assert_eq!(all.len(), total);
                prop_assert_eq!(&all[..], d.interactions());
            }
        }

        #[test]
        fn removal_keeps_transpose(d in arb_dataset(), pick in any::<prop::sample::Index>()) {
            let y = d.interactions()[pick.index(d.len())];
            let r = d.remove_interaction(y).unwrap();
            prop_assert_eq!(r.len(), d.len() - 1);
            prop_assert!(!r.user_items(y.user).contains(&y.item));
            prop_assert!(!r.item_users(y.item).contains(&y.user));
            prop_assert_eq!(r.num_users(), d.num_users());
        }
    }
}
