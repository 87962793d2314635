use super::trace::{page_count, MemoryTrace, TraceEntry, PAGE_BYTES};
use crate::controller::RegionMap;
use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// Bijection from virtual page to physical frame, both 4 KiB.
#[derive(Clone, Debug, PartialEq)]
pub struct PageMapping {
    permutation: Vec<u32>,
    /// Share of accesses whose page sits in an all-fast frame.
    pub fast_coverage: f64,
    /// Frames whose every line maps to a region at the fastest steps.
    pub fast_frames: u64,
}

impl PageMapping {
    pub fn identity(pages: usize) -> Self {
        PageMapping { permutation: (0..pages as u32).collect(), fast_coverage: 0.0, fast_frames: 0 }
    }

    /// Wraps a permutation, rejecting anything that is not a bijection.
    pub fn from_permutation(permutation: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; permutation.len()];
        for &f in &permutation {
            match seen.get_mut(f as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::Mapping(format!("frame {f} repeated or out of range"))),
            }
        }
        Ok(PageMapping { permutation, fast_coverage: 0.0, fast_frames: 0 })
    }

    pub fn frame_of(&self, page: u64) -> Option<u64> {
        self.permutation.get(page as usize).map(|&f| f as u64)
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn inverse(&self) -> PageMapping {
        let mut inv = vec![0u32; self.permutation.len()];
        for (page, &frame) in self.permutation.iter().enumerate() {
            inv[frame as usize] = page as u32;
        }
        PageMapping { permutation: inv, fast_coverage: self.fast_coverage, fast_frames: self.fast_frames }
    }
}

/// Per-frame timing cost: component-wise worst step index over the frame's
/// lines, summed in picoseconds. `None` when a line has no map entry.
fn frame_costs(map: &RegionMap, geometry: &Geometry, frames: u64) -> Vec<Option<(u64, bool)>> {
    let mapping = geometry.mapping();
    let lines_per_frame = PAGE_BYTES / geometry.cacheline_bytes as u64;
    let steps = map.steps();
    (0..frames)
        .map(|f| {
            let mut worst = [0u8; 3];
            for l in 0..lines_per_frame {
                let loc = mapping
                    .decode(f * PAGE_BYTES + l * geometry.cacheline_bytes as u64)
                    .expect("frame inside capacity");
                let region = map.region_of(&loc).expect("location inside geometry");
                let e = map.region_steps(region);
                if e.contains(&u8::MAX) {
                    return None;
                }
                for j in 0..3 {
                    worst[j] = worst[j].max(e[j]);
                }
            }
            let ps = steps.trcd()[worst[0] as usize].ps() as u64
                + steps.trp()[worst[1] as usize].ps() as u64
                + steps.tras()[worst[2] as usize].ps() as u64;
            Some((ps, worst == [0, 0, 0]))
        })
        .collect()
}

/// Greedy placement: hottest pages to fastest frames. Deterministic: ties
/// between pages keep index order.
pub fn allocate_pages(page_hotness: &[u64], map: &RegionMap, geometry: &Geometry) -> Result<PageMapping> {
    if map.geometry() != geometry {
        return Err(Error::param("region map was built for a different geometry"));
    }
    let frames = page_count(geometry)?;
    if page_hotness.len() as u64 != frames {
        return Err(Error::param(format!("hotness covers {} pages, geometry has {frames} frames", page_hotness.len())));
    }
    let costs = frame_costs(map, geometry, frames);
    let cost = |f: u32| costs[f as usize].map_or(u64::MAX, |c| c.0);
    let mapping = geometry.mapping();
    let bank_of = |f: u32| {
        let loc = mapping.decode(f as u64 * PAGE_BYTES).expect("frame inside capacity");
        loc.rank * geometry.banks_per_rank + loc.bank
    };
    // Within one cost class, frames are dealt round-robin over banks so hot
    // pages keep bank-level parallelism.
    let mut frame_order: Vec<u32> = (0..frames as u32).collect();
    frame_order.sort_by_key(|&f| cost(f));
    let mut turn = vec![0u32; frames as usize];
    let mut dealt = std::collections::HashMap::new();
    for &f in &frame_order {
        let k = dealt.entry((cost(f), bank_of(f))).or_insert(0u32);
        turn[f as usize] = *k;
        *k += 1;
    }
    frame_order.sort_by_key(|&f| (cost(f), turn[f as usize], bank_of(f)));
    let mut page_order: Vec<u32> = (0..frames as u32).collect();
    page_order.sort_by_key(|&p| std::cmp::Reverse(page_hotness[p as usize]));

    let mut permutation = vec![0u32; frames as usize];
    for (&p, &f) in page_order.iter().zip(&frame_order) {
        permutation[p as usize] = f;
    }
    let is_fast = |f: u32| costs[f as usize].is_some_and(|c| c.1);
    let total: u64 = page_hotness.iter().sum();
    let covered: u64 = page_hotness.iter().zip(&permutation).filter(|(_, &f)| is_fast(f)).map(|(&h, _)| h).sum();
    let fast_frames = (0..frames as u32).filter(|&f| is_fast(f)).count() as u64;
    Ok(PageMapping {
        permutation,
        fast_coverage: if total == 0 { 1.0 } else { covered as f64 / total as f64 },
        fast_frames,
    })
}

/// Share of `page_hotness` landing in fast frames under `mapping`.
pub fn fast_coverage(page_hotness: &[u64], mapping: &PageMapping, map: &RegionMap, geometry: &Geometry) -> Result<f64> {
    let frames = page_count(geometry)?;
    if page_hotness.len() != mapping.len() || mapping.len() as u64 != frames {
        return Err(Error::param("hotness, mapping and geometry sizes differ"));
    }
    let costs = frame_costs(map, geometry, frames);
    let total: u64 = page_hotness.iter().sum();
    let covered: u64 = page_hotness
        .iter()
        .zip(&mapping.permutation)
        .filter(|(_, &f)| costs[f as usize].is_some_and(|c| c.1))
        .map(|(&h, _)| h)
        .sum();
    Ok(if total == 0 { 1.0 } else { covered as f64 / total as f64 })
}

/// Rewrites each address's page number through `mapping`, keeping the
/// in-page offset and entry order.
pub fn remap_trace(trace: &MemoryTrace, mapping: &PageMapping) -> Result<MemoryTrace> {
    let entries = trace
        .entries
        .iter()
        .map(|e| {
            let page = e.addr / PAGE_BYTES;
            let frame = mapping
                .frame_of(page)
                .ok_or_else(|| Error::Mapping(format!("address {:#x} lies in unmapped page {page}", e.addr)))?;
            Ok(TraceEntry { addr: frame * PAGE_BYTES + e.addr % PAGE_BYTES, ..*e })
        })
        .collect::<Result<Vec<_>>>()?;
    MemoryTrace::new(entries, trace.stream_count)
}
