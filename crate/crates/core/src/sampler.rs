//! Dataset construction: stratified splits, balanced test selection, size
//! and monolingual subsets, and exclusion of discarded gold labels.
//!
//! All operations are pure functions of the pool ordering and a 64-bit seed.
//! Per-label (or per-cell) counts are fixed by the allocation step and never
//! depend on the seed; the seed only decides which documents fill them.
//! Proportional allocation uses largest-remainder rounding.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDoc;
use crate::rng::{derive_seed, seeded};
use crate::schema::{LabelSchema, AUXILIARY_LABELS};
use crate::{jsonl, Error, Result};

pub const DEFAULT_PER_CELL: usize = 18;

/// Splits `target` units proportionally to `weights` by largest remainder.
/// Ties on the remainder go to the earlier index.
pub fn largest_remainder(weights: &[u64], target: u64) -> Vec<u64> {
    let caps: Vec<u64> = weights.iter().map(|_| u64::MAX).collect();
    allocate_capped(weights, &caps, target).expect("uncapped allocation is always feasible")
}

/// Largest-remainder allocation where entry `i` may not exceed `caps[i]`.
///
/// Every entry first receives `min(floor(quota), cap)`. Remaining units go,
/// one per entry, to entries with a fractional quota in order of decreasing
/// remainder, then to any entry still below `floor + 1`, and only then past
/// `floor + 1`.
pub fn allocate_capped(weights: &[u64], caps: &[u64], target: u64) -> Result<Vec<u64>> {
    assert_eq!(weights.len(), caps.len());
    let total: u128 = weights.iter().map(|&w| w as u128).sum();
    let capacity: u128 = caps.iter().map(|&c| c as u128).sum();
    if (target as u128) > capacity {
        return Err(Error::Infeasible(format!(
            "cannot allocate {target} units within capacity {capacity}"
        )));
    }
    if total == 0 {
        if target == 0 {
            return Ok(vec![0; weights.len()]);
        }
        return Err(Error::Infeasible("allocation over zero total weight".into()));
    }
    let mut alloc = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for (&w, &cap) in weights.iter().zip(caps) {
        let prod = target as u128 * w as u128;
        let floor = (prod / total) as u64;
        alloc.push(floor.min(cap));
        remainders.push(prod % total);
    }
    let mut left = target - alloc.iter().sum::<u64>();

    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    let floors: Vec<u64> = alloc.clone();
    for pass in 0..3 {
        for &i in &order {
            if left == 0 {
                break;
            }
            let eligible = match pass {
                0 => remainders[i] > 0 && alloc[i] == floors[i],
                1 => alloc[i] == floors[i],
                _ => true,
            };
            if eligible && alloc[i] < caps[i] {
                let add = if pass == 2 { left.min(caps[i] - alloc[i]) } else { 1 };
                alloc[i] += add;
                left -= add;
            }
        }
    }
    debug_assert_eq!(left, 0);
    Ok(alloc)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyKey {
    #[default]
    Label,
    Lang,
}

impl std::str::FromStr for StratifyKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" => Ok(Self::Label),
            "lang" | "language" => Ok(Self::Lang),
            other => Err(Error::Config(format!("unknown stratify key {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_size: usize,
    pub dev_size: usize,
    #[serde(default)]
    pub stratify_key: StratifyKey,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<LabeledDoc>,
    pub dev: Vec<LabeledDoc>,
    pub manifest: SamplingManifest,
}

/// Sidecar record written next to every sampled JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingManifest {
    pub operation: String,
    pub seed: u64,
    pub spec: serde_json::Value,
    /// Output name → cell key → count.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl SamplingManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("manifest", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn key_of(doc: &LabeledDoc, key: StratifyKey) -> Result<&str> {
    match key {
        StratifyKey::Label => doc.label(),
        StratifyKey::Lang => Ok(doc.lang.as_str()),
    }
}

fn group_by<'a, K: Ord>(
    pool: &'a [LabeledDoc],
    mut key: impl FnMut(&'a LabeledDoc) -> Result<K>,
) -> Result<BTreeMap<K, Vec<usize>>> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, d) in pool.iter().enumerate() {
        groups.entry(key(d)?).or_default().push(i);
    }
    Ok(groups)
}

fn shuffled(indices: &[usize], seed: u64, tags: &[&str]) -> Vec<usize> {
    let mut v = indices.to_vec();
    v.shuffle(&mut seeded(derive_seed(seed, tags)));
    v
}

fn collect_sorted(pool: &[LabeledDoc], mut idx: Vec<usize>) -> Vec<LabeledDoc> {
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i].clone()).collect()
}

fn count_by(docs: &[LabeledDoc], f: impl Fn(&LabeledDoc) -> String) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for d in docs {
        *m.entry(f(d)).or_default() += 1;
    }
    m
}

fn label_of(d: &LabeledDoc) -> String {
    d.label.clone().unwrap_or_default()
}

fn cell_of(d: &LabeledDoc) -> String {
    format!("{}|{}", label_of(d), d.lang)
}

/// Splits a labeled pool into disjoint train and dev sets whose per-label
/// counts follow the pool proportions.
pub fn stratified_split(pool: &[LabeledDoc], spec: &SplitSpec) -> Result<Split> {
    if spec.train_size + spec.dev_size > pool.len() {
        return Err(Error::Infeasible(format!(
            "train {} + dev {} exceeds pool of {}",
            spec.train_size,
            spec.dev_size,
            pool.len()
        )));
    }
    // every document needs a label regardless of the stratification key
    for d in pool {
        d.label()?;
    }
    let groups = group_by(pool, |d| key_of(d, spec.stratify_key))?;
    let counts: Vec<u64> = groups.values().map(|v| v.len() as u64).collect();
    let train_alloc = largest_remainder(&counts, spec.train_size as u64);
    let caps: Vec<u64> = counts.iter().zip(&train_alloc).map(|(c, t)| c - t).collect();
    let dev_alloc = if spec.train_size + spec.dev_size == pool.len() {
        caps.clone()
    } else {
        allocate_capped(&counts, &caps, spec.dev_size as u64)?
    };

    let mut train = Vec::with_capacity(spec.train_size);
    let mut dev = Vec::with_capacity(spec.dev_size);
    for (((key, idx), &t), &d) in groups.iter().zip(&train_alloc).zip(&dev_alloc) {
        let order = shuffled(idx, spec.seed, &["split", key]);
        train.extend_from_slice(&order[..t as usize]);
        dev.extend_from_slice(&order[t as usize..(t + d) as usize]);
    }
    let train = collect_sorted(pool, train);
    let dev = collect_sorted(pool, dev);
    let manifest = SamplingManifest {
        operation: "split".into(),
        seed: spec.seed,
        spec: serde_json::to_value(spec).expect("spec serializes"),
        counts: BTreeMap::from([
            ("train".to_string(), count_by(&train, label_of)),
            ("dev".to_string(), count_by(&dev, label_of)),
        ]),
    };
    Ok(Split {
        train,
        dev,
        manifest,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub per_cell: usize,
    pub seed: u64,
}

impl Default for BalanceSpec {
    fn default() -> Self {
        Self {
            per_cell: DEFAULT_PER_CELL,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedSample {
    pub docs: Vec<LabeledDoc>,
    pub manifest: SamplingManifest,
}

/// Takes `min(per_cell, available)` documents from every (label, language)
/// cell by seeded sampling without replacement.
pub fn balanced_test_selection(pool: &[LabeledDoc], spec: &BalanceSpec) -> Result<BalancedSample> {
    if spec.per_cell == 0 {
        return Err(Error::Config("per_cell must be at least 1".into()));
    }
    let cells = group_by(pool, |d| Ok((d.label()?, d.lang.as_str())))?;
    let mut chosen = Vec::new();
    let mut available = BTreeMap::new();
    for ((label, lang), idx) in &cells {
        let order = shuffled(idx, spec.seed, &["balance", label, lang]);
        chosen.extend_from_slice(&order[..spec.per_cell.min(order.len())]);
        available.insert(format!("{label}|{lang}"), idx.len());
    }
    let docs = collect_sorted(pool, chosen);
    let manifest = SamplingManifest {
        operation: "balance-test".into(),
        seed: spec.seed,
        spec: serde_json::to_value(spec).expect("spec serializes"),
        counts: BTreeMap::from([
            ("available".to_string(), available),
            ("selected".to_string(), count_by(&docs, cell_of)),
        ]),
    };
    Ok(BalancedSample { docs, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub total_before: usize,
    pub excluded_by_label: BTreeMap<String, usize>,
    pub total_after: usize,
}

impl ExclusionReport {
    pub fn excluded(&self) -> usize {
        self.excluded_by_label.values().sum()
    }

    /// Excluded share of `total_before`, in percent.
    pub fn excluded_percent(&self) -> f64 {
        percent(self.excluded(), self.total_before)
    }

    pub fn percent_for(&self, label: &str) -> f64 {
        percent(
            self.excluded_by_label.get(label).copied().unwrap_or(0),
            self.total_before,
        )
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "before: {}\nexcluded: {} ({:.2}%)\n",
            self.total_before,
            self.excluded(),
            self.excluded_percent()
        );
        for (label, n) in &self.excluded_by_label {
            out.push_str(&format!("  {label}: {n} ({:.2}%)\n", self.percent_for(label)));
        }
        out.push_str(&format!("after: {}\n", self.total_after));
        out
    }
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Drops documents whose gold label is a discard label. Gold labels are
/// canonicalized against the schema; the returned documents carry topic ids.
pub fn apply_exclusions(
    gold: &[LabeledDoc],
    schema: &LabelSchema,
) -> Result<(Vec<LabeledDoc>, ExclusionReport)> {
    let mut excluded_by_label: BTreeMap<String, usize> =
        AUXILIARY_LABELS.iter().map(|l| (l.to_string(), 0)).collect();
    let mut kept = Vec::with_capacity(gold.len());
    for doc in gold {
        let label = schema.canonicalize(doc.label()?).map_err(|_| Error::InvalidLabel {
            label: doc.label.clone().unwrap_or_default(),
            options: schema.all_ids(),
        })?;
        if label.is_topic() {
            kept.push(LabeledDoc {
                label: Some(label.id.clone()),
                ..doc.clone()
            });
        } else {
            *excluded_by_label.entry(label.id.clone()).or_default() += 1;
        }
    }
    let report = ExclusionReport {
        total_before: gold.len(),
        excluded_by_label,
        total_after: kept.len(),
    };
    Ok((kept, report))
}

/// Language targets for `size` documents: equal shares (±1), except that a
/// language with fewer documents than its share contributes all it has.
fn balanced_language_targets(available: &[u64], size: u64) -> Vec<u64> {
    let mut targets = vec![0u64; available.len()];
    let mut active: Vec<usize> = (0..available.len()).collect();
    let mut remaining = size;
    loop {
        if active.is_empty() {
            break;
        }
        let share = remaining / active.len() as u64;
        let short: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&g| available[g] <= share)
            .collect();
        if short.is_empty() {
            let extra = remaining % active.len() as u64;
            for (j, &g) in active.iter().enumerate() {
                targets[g] = share + u64::from((j as u64) < extra);
            }
            break;
        }
        for g in short {
            targets[g] = available[g];
            remaining -= available[g];
            active.retain(|&x| x != g);
        }
    }
    targets
}

/// Edmonds-Karp over a dense capacity matrix; returns the flow matrix.
fn max_flow(cap: &mut [Vec<u64>], source: usize, sink: usize) -> u64 {
    let n = cap.len();
    let mut total = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[source] = source;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for v in 0..n {
                if prev[v] == usize::MAX && cap[u][v] > 0 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            return total;
        }
        let mut bottleneck = u64::MAX;
        let mut v = sink;
        while v != source {
            bottleneck = bottleneck.min(cap[prev[v]][v]);
            v = prev[v];
        }
        let mut v = sink;
        while v != source {
            let u = prev[v];
            cap[u][v] -= bottleneck;
            cap[v][u] += bottleneck;
            v = u;
        }
        total += bottleneck;
    }
}

/// Finds a label x language table with the given row targets, cell caps and
/// (optionally) column targets, starting from the proportional table.
fn fit_table(
    row_targets: &[u64],
    col_limits: &[u64],
    cells: &[Vec<u64>],
    size: u64,
) -> Option<Vec<Vec<u64>>> {
    let (r, c) = (row_targets.len(), col_limits.len());
    let mut table = vec![vec![0u64; c]; r];
    if size > 0 {
        for i in 0..r {
            for j in 0..c {
                let prop = (row_targets[i] as u128 * col_limits[j].min(size) as u128 / size as u128) as u64;
                table[i][j] = prop.min(cells[i][j]);
            }
        }
    }
    // keep the seed table within the row targets and column limits
    for i in 0..r {
        let mut over = table[i].iter().sum::<u64>().saturating_sub(row_targets[i]);
        for j in (0..c).rev() {
            let cut = over.min(table[i][j]);
            table[i][j] -= cut;
            over -= cut;
        }
    }
    for j in 0..c {
        let mut over = (0..r).map(|i| table[i][j]).sum::<u64>().saturating_sub(col_limits[j]);
        for i in (0..r).rev() {
            let cut = over.min(table[i][j]);
            table[i][j] -= cut;
            over -= cut;
        }
    }
    let need: u64 = row_targets.iter().sum::<u64>() - table.iter().flatten().sum::<u64>();
    // nodes: 0 = source, 1..=r rows, r+1..=r+c cols, r+c+1 sink
    let n = r + c + 2;
    let (src, sink) = (0, n - 1);
    let mut cap = vec![vec![0u64; n]; n];
    for i in 0..r {
        cap[src][1 + i] = row_targets[i] - table[i].iter().sum::<u64>();
        for j in 0..c {
            cap[1 + i][1 + r + j] = cells[i][j] - table[i][j];
        }
    }
    for j in 0..c {
        cap[1 + r + j][sink] = col_limits[j] - (0..r).map(|i| table[i][j]).sum::<u64>();
    }
    let original = cap.clone();
    if max_flow(&mut cap, src, sink) != need {
        return None;
    }
    for (i, row) in table.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let (u, v) = (1 + i, 1 + r + j);
            *cell += original[u][v] - cap[u][v];
        }
    }
    Some(table)
}

/// Draws `size` documents stratified by label and balanced across languages.
pub fn size_subset(train: &[LabeledDoc], size: usize, seed: u64) -> Result<Vec<LabeledDoc>> {
    if size > train.len() {
        return Err(Error::Infeasible(format!(
            "subset of {size} requested from {} documents",
            train.len()
        )));
    }
    let cells = group_by(train, |d| Ok((d.label()?, d.lang.as_str())))?;
    let labels: Vec<&str> = cells.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    let langs: Vec<&str> = cells.keys().map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect();
    let mut cell_counts = vec![vec![0u64; langs.len()]; labels.len()];
    for ((l, g), idx) in &cells {
        let i = labels.binary_search(l).expect("label present");
        let j = langs.binary_search(g).expect("lang present");
        cell_counts[i][j] = idx.len() as u64;
    }
    let label_totals: Vec<u64> = cell_counts.iter().map(|row| row.iter().sum()).collect();
    let lang_totals: Vec<u64> = (0..langs.len())
        .map(|j| cell_counts.iter().map(|row| row[j]).sum())
        .collect();
    let size = size as u64;
    let row_targets = largest_remainder(&label_totals, size);
    let col_targets = balanced_language_targets(&lang_totals, size);
    let table = match fit_table(&row_targets, &col_targets, &cell_counts, size) {
        Some(t) => t,
        None => {
            log::warn!("no language-balanced table for size {size}; relaxing language balance");
            fit_table(&row_targets, &lang_totals, &cell_counts, size)
                .expect("label targets never exceed label totals")
        }
    };

    let mut chosen = Vec::with_capacity(size as usize);
    for ((l, g), idx) in &cells {
        let i = labels.binary_search(l).expect("label present");
        let j = langs.binary_search(g).expect("lang present");
        let take = table[i][j] as usize;
        if take > 0 {
            let order = shuffled(idx, seed, &["subset", l, g]);
            chosen.extend_from_slice(&order[..take]);
        }
    }
    Ok(collect_sorted(train, chosen))
}

/// One independent subset per size, each with its own derived seed.
pub fn size_subsets(train: &[LabeledDoc], sizes: &[usize], seed: u64) -> Result<Vec<Vec<LabeledDoc>>> {
    sizes
        .iter()
        .map(|&s| size_subset(train, s, derive_seed(seed, &["size", &s.to_string()])))
        .collect()
}

/// `n` documents in `lang`, stratified by label against the label
/// distribution of the whole training set.
pub fn monolingual_subset(
    train: &[LabeledDoc],
    lang: &str,
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledDoc>> {
    let overall = group_by(train, |d| d.label())?;
    let in_lang: Vec<usize> = (0..train.len()).filter(|&i| train[i].lang == lang).collect();
    if in_lang.len() < n {
        return Err(Error::InsufficientDocuments {
            lang: lang.to_string(),
            available: in_lang.len(),
            requested: n,
        });
    }
    let mut per_label: BTreeMap<&str, Vec<usize>> = overall.keys().map(|&l| (l, Vec::new())).collect();
    for &i in &in_lang {
        per_label.get_mut(train[i].label()?).expect("label known").push(i);
    }
    let weights: Vec<u64> = overall.values().map(|v| v.len() as u64).collect();
    let caps: Vec<u64> = per_label.values().map(|v| v.len() as u64).collect();
    let alloc = allocate_capped(&weights, &caps, n as u64)?;
    let mut chosen = Vec::with_capacity(n);
    for ((label, idx), take) in per_label.iter().zip(alloc) {
        let order = shuffled(idx, seed, &["mono", lang, label]);
        chosen.extend_from_slice(&order[..take as usize]);
    }
    Ok(collect_sorted(train, chosen))
}

/// Writes `docs` to `path` and the manifest to `<path>.manifest.json`.
pub fn write_with_manifest(path: &Path, docs: &[LabeledDoc], manifest: &SamplingManifest) -> Result<()> {
    jsonl::write(path, docs)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".manifest.json");
    manifest.save(Path::new(&sidecar))
}
