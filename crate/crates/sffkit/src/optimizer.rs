//! Merging of protected register slices into wrapper instances: BFD bin
//! packing, exact area-minimizing width covering, and plan cross-checking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecc::redundant_bits;
use crate::spec_model::{
    Diagnostic, ModelOfThings, OptimizeAlgorithm, ProtectionMethod,
};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("chunk {register}[{msb}:{lsb}] is {size} bits, larger than max width {max_width}")]
    ChunkTooLarge { register: String, msb: u32, lsb: u32, size: u32, max_width: u32 },
    #[error("cost table has no entry for width {0}")]
    MissingCostEntry(u32),
    #[error("cost table is empty")]
    EmptyCostTable,
    #[error("cost table row {row}: {message}")]
    InvalidCostRow { row: usize, message: String },
    #[error("invalid plan JSON: {0}")]
    Json(String),
}

/// Chunks with different compat keys are never merged into one wrapper.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompatKey {
    pub method: ProtectionMethod,
    pub clock_domain: String,
    pub reset_domain: String,
    pub self_test: bool,
}

/// One protected range viewed as a packable item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub source_register: String,
    pub msb: u32,
    pub lsb: u32,
    pub declaration_index: usize,
    pub key: CompatKey,
}

impl Chunk {
    pub fn size_bits(&self) -> u32 {
        self.msb - self.lsb + 1
    }
}

/// Bit-exact source-to-destination slice correspondence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceMapEntry {
    pub source_register: String,
    pub source_msb: u32,
    pub source_lsb: u32,
    pub wrapper: String,
    pub dest_msb: u32,
    pub dest_lsb: u32,
}

impl SliceMapEntry {
    pub fn width(&self) -> u32 {
        self.source_msb - self.source_lsb + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrapperSpec {
    pub instance: String,
    pub data_width: u32,
    pub method: ProtectionMethod,
    pub clock_domain: String,
    pub reset_domain: String,
    pub self_test: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergePlan {
    pub algorithm: OptimizeAlgorithm,
    pub wrappers: Vec<WrapperSpec>,
    pub mapping: Vec<SliceMapEntry>,
    pub total_area: f64,
}

impl MergePlan {
    pub fn wrapper(&self, instance: &str) -> Option<&WrapperSpec> {
        self.wrappers.iter().find(|w| w.instance == instance)
    }

    pub fn entries_for<'a>(&'a self, instance: &'a str) -> impl Iterator<Item = &'a SliceMapEntry> + 'a {
        self.mapping.iter().filter(move |e| e.wrapper == instance)
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, OptimizerError> {
        serde_json::from_str(text).map_err(|e| OptimizerError::Json(e.to_string()))
    }
}

/// Per-width wrapper area in abstract cost units, defined for 1..=max width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    per_width_area: Vec<f64>,
}

impl CostTable {
    pub fn new(per_width_area: Vec<f64>) -> Self {
        CostTable { per_width_area }
    }

    pub fn max_width(&self) -> u32 {
        self.per_width_area.len() as u32
    }

    pub fn get(&self, width: u32) -> Result<f64, OptimizerError> {
        self.per_width_area
            .get(width.wrapping_sub(1) as usize)
            .copied()
            .ok_or(OptimizerError::MissingCostEntry(width))
    }

    /// Flip-flop count only: w data bits plus SECDED redundancy.
    pub fn builtin_linear(max_width: u32) -> Self {
        let table = (1..=max_width)
            .map(|w| (w + redundant_bits(ProtectionMethod::Secded, w).expect("w >= 1")) as f64)
            .collect();
        CostTable::new(table)
    }

    /// Flip-flop count plus a fixed per-wrapper overhead and a convex
    /// logic-cost term. Under this table the 34-bit three-register example
    /// splits into two 17-bit wrappers.
    pub fn builtin_paper(max_width: u32) -> Self {
        let table = (1..=max_width)
            .map(|w| {
                let ff = (w + redundant_bits(ProtectionMethod::Secded, w).expect("w >= 1")) as f64;
                10.0 + ff + 0.05 * (w as f64) * (w as f64)
            })
            .collect();
        CostTable::new(table)
    }

    /// Parses `width,area` CSV rows (header required). Every width in
    /// 1..=max over the listed widths must be present.
    pub fn from_csv(text: &str) -> Result<Self, OptimizerError> {
        let mut rows: BTreeMap<u32, f64> = BTreeMap::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim().eq_ignore_ascii_case("width,area") => {}
            _ => {
                return Err(OptimizerError::InvalidCostRow {
                    row: 1,
                    message: "expected header 'width,area'".into(),
                })
            }
        }
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (w, a) = line.split_once(',').ok_or(OptimizerError::InvalidCostRow {
                row: i + 1,
                message: "expected 'width,area'".into(),
            })?;
            let width: u32 = w.trim().parse().map_err(|_| OptimizerError::InvalidCostRow {
                row: i + 1,
                message: format!("bad width '{}'", w),
            })?;
            let area: f64 = a.trim().parse().map_err(|_| OptimizerError::InvalidCostRow {
                row: i + 1,
                message: format!("bad area '{}'", a),
            })?;
            if width == 0 || area <= 0.0 {
                return Err(OptimizerError::InvalidCostRow {
                    row: i + 1,
                    message: "width must be >= 1 and area > 0".into(),
                });
            }
            rows.insert(width, area);
        }
        let max = *rows.keys().next_back().ok_or(OptimizerError::EmptyCostTable)?;
        let mut table = Vec::with_capacity(max as usize);
        for w in 1..=max {
            table.push(*rows.get(&w).ok_or(OptimizerError::MissingCostEntry(w))?);
        }
        Ok(CostTable::new(table))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("width,area\n");
        for (i, a) in self.per_width_area.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, a));
        }
        s
    }
}

/// One chunk per protected range, in document order.
pub fn chunks_from_mot(mot: &ModelOfThings) -> Vec<Chunk> {
    mot.protections
        .iter()
        .enumerate()
        .map(|(i, p)| Chunk {
            source_register: p.register.clone(),
            msb: p.msb,
            lsb: p.lsb,
            declaration_index: i,
            key: CompatKey {
                method: p.method,
                clock_domain: p.clock_domain.clone(),
                reset_domain: p.reset_domain.clone(),
                self_test: p.self_test,
            },
        })
        .collect()
}

fn wrapper_name(index: usize) -> String {
    format!("sff_wrapper_{}", index + 1)
}

/// Chunks sorted largest first, ties broken by declaration index.
fn sorted_decreasing(chunks: &[Chunk]) -> Vec<Chunk> {
    let mut v = chunks.to_vec();
    v.sort_by(|a, b| {
        b.size_bits().cmp(&a.size_bits()).then(a.declaration_index.cmp(&b.declaration_index))
    });
    v
}

fn group_by_key(chunks: &[Chunk]) -> BTreeMap<CompatKey, Vec<Chunk>> {
    let mut groups: BTreeMap<CompatKey, Vec<Chunk>> = BTreeMap::new();
    for c in chunks {
        groups.entry(c.key.clone()).or_default().push(c.clone());
    }
    groups
}

/// Identity plan: one wrapper per chunk, no merging.
pub fn pack_none(chunks: &[Chunk]) -> MergePlan {
    let mut wrappers = Vec::new();
    let mut mapping = Vec::new();
    for (i, c) in chunks.iter().enumerate() {
        let name = wrapper_name(i);
        wrappers.push(WrapperSpec {
            instance: name.clone(),
            data_width: c.size_bits(),
            method: c.key.method,
            clock_domain: c.key.clock_domain.clone(),
            reset_domain: c.key.reset_domain.clone(),
            self_test: c.key.self_test,
        });
        mapping.push(SliceMapEntry {
            source_register: c.source_register.clone(),
            source_msb: c.msb,
            source_lsb: c.lsb,
            wrapper: name,
            dest_msb: c.size_bits() - 1,
            dest_lsb: 0,
        });
    }
    MergePlan { algorithm: OptimizeAlgorithm::None, wrappers, mapping, total_area: 0.0 }
}

/// Best-Fit Decreasing bin packing. Chunks are never split; each is placed
/// into the open bin with the smallest sufficient residual capacity.
pub fn pack_bfd(chunks: &[Chunk], max_width: u32) -> Result<MergePlan, OptimizerError> {
    struct Bin {
        key: CompatKey,
        used: u32,
        entries: Vec<(Chunk, u32)>, // chunk, dest lsb
    }
    let mut bins: Vec<Bin> = Vec::new();
    for (key, group) in group_by_key(chunks) {
        for c in sorted_decreasing(&group) {
            let size = c.size_bits();
            if size > max_width {
                return Err(OptimizerError::ChunkTooLarge {
                    register: c.source_register.clone(),
                    msb: c.msb,
                    lsb: c.lsb,
                    size,
                    max_width,
                });
            }
            // Best fit: smallest sufficient residual, ties by bin index.
            let best = bins
                .iter()
                .enumerate()
                .filter(|(_, b)| b.key == key && max_width - b.used >= size)
                .min_by_key(|(i, b)| (max_width - b.used - size, *i))
                .map(|(i, _)| i);
            match best {
                Some(i) => {
                    let offset = bins[i].used;
                    bins[i].entries.push((c, offset));
                    bins[i].used += size;
                }
                None => bins.push(Bin { key: key.clone(), used: size, entries: vec![(c, 0)] }),
            }
        }
    }

    let mut wrappers = Vec::new();
    let mut mapping = Vec::new();
    for (i, bin) in bins.iter().enumerate() {
        let name = wrapper_name(i);
        wrappers.push(WrapperSpec {
            instance: name.clone(),
            data_width: bin.used,
            method: bin.key.method,
            clock_domain: bin.key.clock_domain.clone(),
            reset_domain: bin.key.reset_domain.clone(),
            self_test: bin.key.self_test,
        });
        for (c, lsb) in &bin.entries {
            mapping.push(SliceMapEntry {
                source_register: c.source_register.clone(),
                source_msb: c.msb,
                source_lsb: c.lsb,
                wrapper: name.clone(),
                dest_msb: lsb + c.size_bits() - 1,
                dest_lsb: *lsb,
            });
        }
    }
    MergePlan { algorithm: OptimizeAlgorithm::Bfd, wrappers, mapping, total_area: 0.0 }
        .sorted_mapping_ok()
}

impl MergePlan {
    // Mapping entries ordered by wrapper creation, then destination offset.
    fn sorted_mapping_ok(mut self) -> Result<MergePlan, OptimizerError> {
        let order: BTreeMap<&str, usize> =
            self.wrappers.iter().enumerate().map(|(i, w)| (w.instance.as_str(), i)).collect();
        self.mapping.sort_by_key(|e| (order[e.wrapper.as_str()], e.dest_lsb));
        Ok(self)
    }
}

/// Exact minimum-area width covering, equivalent in optimum to the ILP
/// formulation: min sum n_w * cost[w] s.t. sum n_w * w = total bits, solved
/// per compat group by dynamic programming. Chunks may be split across bins.
pub fn pack_ilp(
    chunks: &[Chunk],
    max_width: u32,
    costs: &CostTable,
) -> Result<MergePlan, OptimizerError> {
    if costs.max_width() < max_width {
        return Err(OptimizerError::MissingCostEntry(costs.max_width() + 1));
    }
    let mut wrappers = Vec::new();
    let mut mapping = Vec::new();
    let mut next_wrapper = 0usize;

    for (key, group) in group_by_key(chunks) {
        let total: u32 = group.iter().map(Chunk::size_bits).sum();
        if total == 0 {
            continue;
        }
        let widths = optimal_widths(total, max_width, costs)?;

        // Fill bins in produced order: chunks largest first, split at bin
        // boundaries, lower source bits first, destination offsets from 0.
        let bin_names: Vec<String> = widths
            .iter()
            .map(|_| {
                let n = wrapper_name(next_wrapper);
                next_wrapper += 1;
                n
            })
            .collect();
        for (name, &w) in bin_names.iter().zip(&widths) {
            wrappers.push(WrapperSpec {
                instance: name.clone(),
                data_width: w,
                method: key.method,
                clock_domain: key.clock_domain.clone(),
                reset_domain: key.reset_domain.clone(),
                self_test: key.self_test,
            });
        }
        let mut bin_idx = 0usize;
        let mut offset = 0u32;
        for c in sorted_decreasing(&group) {
            let mut consumed = 0u32;
            while consumed < c.size_bits() {
                let room = widths[bin_idx] - offset;
                let take = room.min(c.size_bits() - consumed);
                mapping.push(SliceMapEntry {
                    source_register: c.source_register.clone(),
                    source_msb: c.lsb + consumed + take - 1,
                    source_lsb: c.lsb + consumed,
                    wrapper: bin_names[bin_idx].clone(),
                    dest_msb: offset + take - 1,
                    dest_lsb: offset,
                });
                consumed += take;
                offset += take;
                if offset == widths[bin_idx] {
                    bin_idx += 1;
                    offset = 0;
                }
            }
        }
    }
    MergePlan { algorithm: OptimizeAlgorithm::Ilp, wrappers, mapping, total_area: 0.0 }
        .sorted_mapping_ok()
}

/// Minimum-cost width multiset covering exactly `total` bits with widths in
/// 1..=max_width. Among optima, returns the multiset whose ascending width
/// sequence is lexicographically smallest; output is sorted descending.
fn optimal_widths(total: u32, max_width: u32, costs: &CostTable) -> Result<Vec<u32>, OptimizerError> {
    let t = total as usize;
    let wm = max_width as usize;
    // dp[t][w] = min cost covering t bits using widths >= w.
    let mut dp = vec![vec![f64::INFINITY; wm + 2]; t + 1];
    dp[0] = vec![0.0; wm + 2];
    for ti in 1..=t {
        for w in (1..=wm).rev() {
            let mut best = dp[ti][w + 1];
            if w <= ti {
                let cand = costs.get(w as u32)? + dp[ti - w][w];
                if cand < best {
                    best = cand;
                }
            }
            dp[ti][w] = best;
        }
    }
    // Greedy reconstruction, preferring the smallest width at each step,
    // yields the lexicographically smallest ascending sequence.
    let mut widths = Vec::new();
    let mut ti = t;
    let mut w = 1usize;
    while ti > 0 {
        debug_assert!(w <= wm, "covering always feasible with width 1");
        if w <= ti && dp[ti][w] == costs.get(w as u32)? + dp[ti - w][w] {
            widths.push(w as u32);
            ti -= w;
        } else {
            w += 1;
        }
    }
    widths.reverse();
    Ok(widths)
}

/// Sum of per-wrapper areas under a cost table.
pub fn plan_area(plan: &MergePlan, costs: &CostTable) -> Result<f64, OptimizerError> {
    plan.wrappers.iter().map(|w| costs.get(w.data_width)).sum()
}

/// Attaches the total area computed from `costs` to the plan.
pub fn with_area(mut plan: MergePlan, costs: &CostTable) -> Result<MergePlan, OptimizerError> {
    plan.total_area = plan_area(&plan, costs)?;
    Ok(plan)
}

/// Compares two independently produced plans; empty means identical wrapper
/// widths, order, and slice mappings.
pub fn crosscheck_plans(a: &MergePlan, b: &MergePlan) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    if a.algorithm != b.algorithm {
        diags.push(Diagnostic::error(
            "plan",
            format!("algorithm differs: {} vs {}", a.algorithm.name(), b.algorithm.name()),
        ));
    }
    if a.wrappers.len() != b.wrappers.len() {
        diags.push(Diagnostic::error(
            "plan",
            format!("wrapper count differs: {} vs {}", a.wrappers.len(), b.wrappers.len()),
        ));
    }
    for (wa, wb) in a.wrappers.iter().zip(&b.wrappers) {
        if wa != wb {
            diags.push(Diagnostic::error(
                format!("wrapper {}", wa.instance),
                format!(
                    "differs: {} dw={} vs {} dw={}",
                    wa.instance, wa.data_width, wb.instance, wb.data_width
                ),
            ));
        }
    }
    if a.mapping.len() != b.mapping.len() {
        diags.push(Diagnostic::error(
            "plan",
            format!("slice count differs: {} vs {}", a.mapping.len(), b.mapping.len()),
        ));
    }
    for (ea, eb) in a.mapping.iter().zip(&b.mapping) {
        if ea != eb {
            diags.push(Diagnostic::error(
                format!("slice {}[{}:{}]", ea.source_register, ea.source_msb, ea.source_lsb),
                format!(
                    "differs: {}[{}:{}] -> {}[{}:{}] vs {}[{}:{}] -> {}[{}:{}]",
                    ea.source_register,
                    ea.source_msb,
                    ea.source_lsb,
                    ea.wrapper,
                    ea.dest_msb,
                    ea.dest_lsb,
                    eb.source_register,
                    eb.source_msb,
                    eb.source_lsb,
                    eb.wrapper,
                    eb.dest_msb,
                    eb.dest_lsb
                ),
            ));
        }
    }
    diags
}

/// Runs the algorithm selected by `mot.options` (or an override).
pub fn pack(
    mot: &ModelOfThings,
    algorithm: OptimizeAlgorithm,
    costs: &CostTable,
) -> Result<MergePlan, OptimizerError> {
    let chunks = chunks_from_mot(mot);
    let plan = match algorithm {
        OptimizeAlgorithm::None => pack_none(&chunks),
        OptimizeAlgorithm::Bfd => pack_bfd(&chunks, mot.options.max_merged_width)?,
        OptimizeAlgorithm::Ilp => pack_ilp(&chunks, mot.options.max_merged_width, costs)?,
    };
    with_area(plan, costs)
}
