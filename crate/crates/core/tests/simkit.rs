use flydram::controller::{build_region_map, compress_slow_set, Granularity, LatencySteps, TimingSource};
use flydram::device::{generate_profile, LatencyProfile, TimingParams, VariationParams};
use flydram::simkit::*;
use flydram::{Geometry, Latency, Location};

fn geometry() -> Geometry {
    Geometry {
        channels: 2,
        ranks_per_channel: 1,
        banks_per_rank: 8,
        rows_per_bank: 256,
        cachelines_per_row: 128,
        cacheline_bytes: 64,
    }
}

fn ns(v: f64) -> Latency {
    Latency::from_ns(v)
}

fn all_fast(g: Geometry) -> LatencyProfile {
    LatencyProfile::uniform(g, ns(7.5), ns(7.5), ns(18.0), ns(0.5)).unwrap()
}

fn baseline() -> SimConfig {
    SimConfig::new(TimingSource::Uniform(TimingParams::ddr3_1333h()))
}

fn flydram(profile: &LatencyProfile, granularity: Granularity) -> SimConfig {
    SimConfig::new(TimingSource::Map(build_region_map(profile, granularity, &LatencySteps::ddr3_default(), 0).unwrap()))
}

/// Warm-up writes open row 0 in every bank, then reads visit the banks
/// round-robin, each to a fresh row, so every read is a row conflict whose
/// bank was last activated long ago.
fn serialized_miss_trace(g: &Geometry, rounds: u32) -> MemoryTrace {
    let m = g.mapping();
    let banks: Vec<(u32, u32)> = (0..g.channels).flat_map(|c| (0..g.banks_per_rank).map(move |b| (c, b))).collect();
    let at = |c, b, row| m.encode(&Location { channel: c, rank: 0, bank: b, row, cacheline: 3 }).unwrap();
    let mut entries: Vec<TraceEntry> =
        banks.iter().map(|&(c, b)| TraceEntry { tick: 0, op: Op::Write, addr: at(c, b, 0) }).collect();
    for r in 1..=rounds {
        for &(c, b) in &banks {
            entries.push(TraceEntry { tick: 0, op: Op::Read, addr: at(c, b, r) });
        }
    }
    MemoryTrace::new(entries, 1).unwrap()
}

#[test]
fn serialized_misses_match_closed_form() {
    let g = geometry();
    let trace = serialized_miss_trace(&g, 20);
    let mut cfg = baseline();
    cfg.mlp_limit = 1;
    let base = simulate(&trace, &all_fast(g), &cfg).unwrap();
    let spec = TimingParams::ddr3_1333h();
    let closed = spec.trp_cyc() + spec.trcd_cyc() + spec.tcl_cyc() + spec.burst_cyc();
    assert_eq!(closed, 31);
    assert_eq!(base.avg_read_latency_cyc, closed as f64);
    assert_eq!(base.p99_read_latency_cyc, closed);

    let mut fly = flydram(&all_fast(g), Granularity::Row);
    fly.mlp_limit = 1;
    let fast = simulate(&trace, &all_fast(g), &fly).unwrap();
    assert_eq!(fast.avg_read_latency_cyc, (closed - 8) as f64);
    assert_eq!(fast.injected_bit_flips, 0);
    assert!(speedup(&base, &fast).unwrap() > 1.0);
}

#[test]
fn empty_trace_takes_no_time() {
    let t = MemoryTrace::new(vec![], 1).unwrap();
    let s = simulate(&t, &all_fast(geometry()), &baseline()).unwrap();
    assert_eq!((s.requests_served, s.total_cycles), (0, 0));
}

#[test]
fn speedup_arithmetic_and_trace_check() {
    let t = gen_trace(TraceKind::RandomUniform, 500, 4, 1, &geometry()).unwrap();
    let s = simulate(&t, &all_fast(geometry()), &baseline()).unwrap();
    assert_eq!(speedup(&s, &s).unwrap(), 1.0);
    let (mut a, mut b) = (s.clone(), s.clone());
    a.total_cycles = 1000;
    b.total_cycles = 500;
    assert_eq!(speedup(&a, &b).unwrap(), 2.0);
    let mut other = s.clone();
    other.trace_fingerprint = "0".into();
    assert!(speedup(&s, &other).is_err());
}

#[test]
fn row_hit_calibration() {
    let g = geometry();
    let p = all_fast(g);
    let stream = gen_trace(TraceKind::Stream, 20_000, 4, 3, &g).unwrap();
    assert!(simulate(&stream, &p, &baseline()).unwrap().row_hit_rate >= 0.9);
    let random = gen_trace(TraceKind::RandomUniform, 20_000, 4, 3, &g).unwrap();
    assert!(simulate(&random, &p, &baseline()).unwrap().row_hit_rate <= 0.2);
}

#[test]
fn conservative_maps_inject_nothing_and_dominate() {
    let g = geometry();
    let params = VariationParams { cluster_radius: 10.0, ..Default::default() };
    for seed in 1..=3 {
        let p = generate_profile(&g, &params, seed).unwrap();
        for kind in
            [TraceKind::Stream, TraceKind::RandomUniform, TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 }]
        {
            let t = gen_trace(kind, 20_000, 4, seed, &g).unwrap();
            let base = simulate(&t, &p, &baseline()).unwrap();
            assert_eq!(base.injected_bit_flips, 0);
            for gr in [Granularity::CachelineGroup(8), Granularity::Row, Granularity::Bank] {
                let s = simulate(&t, &p, &flydram(&p, gr)).unwrap();
                assert_eq!(s.injected_bit_flips, 0, "{kind} {gr}");
                assert!(s.avg_read_latency_cyc <= base.avg_read_latency_cyc, "{kind} {gr}");
            }
            let map = build_region_map(&p, Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
            let filtered = SimConfig::new(TimingSource::Filter(compress_slow_set(&map, 0.01).unwrap()));
            assert_eq!(simulate(&t, &p, &filtered).unwrap().injected_bit_flips, 0);
        }
    }
}

#[test]
fn unsafe_uniform_timings_do_inject() {
    let g = geometry();
    let p = generate_profile(&g, &VariationParams { cluster_radius: 10.0, ..Default::default() }, 1).unwrap();
    let fast = TimingParams::ddr3_1333h().with_core(ns(7.5), ns(7.5), ns(27.0)).unwrap();
    let t = gen_trace(TraceKind::RandomUniform, 20_000, 4, 1, &g).unwrap();
    let mut cfg = SimConfig::new(TimingSource::Uniform(fast));
    let plain = simulate(&t, &p, &cfg).unwrap();
    assert!(plain.injected_bit_flips > 0);
    assert_eq!(plain.ecc_corrected, 0);
    cfg.ecc = true;
    let ecc = simulate(&t, &p, &cfg).unwrap();
    assert_eq!(ecc.injected_bit_flips, plain.injected_bit_flips);
    assert!(ecc.ecc_corrected > 0);
}

#[test]
fn deterministic_with_jitter() {
    let g = geometry();
    let p =
        generate_profile(&g, &VariationParams { cluster_radius: 10.0, jitter_sigma_ns: 0.5, ..Default::default() }, 2)
            .unwrap();
    let t = gen_trace(TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 }, 5_000, 4, 2, &g).unwrap();
    let cfg = flydram(&p, Granularity::Row);
    assert_eq!(simulate(&t, &p, &cfg).unwrap(), simulate(&t, &p, &cfg).unwrap());
}

#[test]
fn mapping_errors_name_the_address() {
    let g = geometry();
    let t = MemoryTrace::new(vec![TraceEntry { tick: 0, op: Op::Read, addr: g.capacity_bytes() }], 1).unwrap();
    assert!(simulate(&t, &all_fast(g), &baseline()).is_err());
}

#[test]
fn hotspot_share() {
    let g = geometry();
    let t = gen_trace(TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 }, 100_000, 4, 11, &g).unwrap();
    let hot = t.page_hotness(&g).unwrap();
    let mut sorted = hot.clone();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let hot_pages = (hot.len() as f64 * 0.1).round() as usize;
    // Hot pages are the ones with the highest counts by a wide margin.
    let share = sorted[..hot_pages].iter().sum::<u64>() as f64 / 100_000.0;
    assert!((share - 0.9).abs() <= 0.01, "{share}");
}

#[test]
fn allocation_examples() {
    let g = geometry();
    let frames = (g.capacity_bytes() / PAGE_BYTES) as usize;
    let fast_map = build_region_map(&all_fast(g), Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
    let hot: Vec<u64> = (0..frames as u64).map(|i| i % 7).collect();
    let m = allocate_pages(&hot, &fast_map, &g).unwrap();
    assert_eq!(m.fast_coverage, 1.0);
    assert!(allocate_pages(&hot[1..], &fast_map, &g).is_err());

    // Slow upper half of every bank: half the frames are slow.
    let mut p = all_fast(g);
    for line in 0..g.total_lines() {
        let loc = g.line_location(line);
        if loc.row >= g.rows_per_bank / 2 {
            p.set_line_trcd(&loc, ns(9.0)).unwrap();
        }
    }
    let map = build_region_map(&p, Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
    let mut one = vec![0u64; frames];
    one[frames - 1] = 1000;
    let m = allocate_pages(&one, &map, &g).unwrap();
    assert_eq!(m.fast_coverage, 1.0);
    assert_eq!(m.fast_frames, frames as u64 / 2);
}

#[test]
fn remap_identity_and_inverse() {
    let g = geometry();
    let t = gen_trace(TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 }, 2_000, 4, 5, &g).unwrap();
    let frames = (g.capacity_bytes() / PAGE_BYTES) as usize;
    assert_eq!(remap_trace(&t, &PageMapping::identity(frames)).unwrap(), t);
    let perm: Vec<u32> = (0..frames as u32).rev().collect();
    let m = PageMapping::from_permutation(perm).unwrap();
    let there = remap_trace(&t, &m).unwrap();
    assert_ne!(there, t);
    assert_eq!(remap_trace(&there, &m.inverse()).unwrap(), t);
    assert!(PageMapping::from_permutation(vec![0, 0]).is_err());
    assert!(remap_trace(&t, &PageMapping::identity(1)).is_err());
}

#[test]
fn allocation_helps_hotspot_latency() {
    let g = geometry();
    let params = VariationParams { cluster_radius: 10.0, base_fast_fraction: 0.8, ..Default::default() };
    let p = generate_profile(&g, &params, 4).unwrap();
    let t = gen_trace(TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 }, 20_000, 4, 4, &g).unwrap();
    let map = build_region_map(&p, Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
    let m = allocate_pages(&t.page_hotness(&g).unwrap(), &map, &g).unwrap();
    let remapped = remap_trace(&t, &m).unwrap();
    let cfg = SimConfig::new(TimingSource::Map(map));
    let plain = simulate(&t, &p, &cfg).unwrap();
    let placed = simulate(&remapped, &p, &cfg).unwrap();
    assert!(placed.avg_read_latency_cyc <= plain.avg_read_latency_cyc);
}

#[test]
fn greedy_coverage_beats_random_placements() {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let g = geometry();
    let mut p = all_fast(g);
    for line in 0..g.total_lines() {
        let loc = g.line_location(line);
        if !loc.row.is_multiple_of(5) {
            p.set_line_trcd(&loc, ns(9.0)).unwrap();
        }
    }
    let map = build_region_map(&p, Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
    let t = gen_trace(TraceKind::Hotspot { fraction_hot: 0.1, hot_bias: 0.9 }, 50_000, 4, 9, &g).unwrap();
    let hot = t.page_hotness(&g).unwrap();
    let greedy = allocate_pages(&hot, &map, &g).unwrap();
    assert_eq!(fast_coverage(&hot, &greedy, &map, &g).unwrap(), greedy.fast_coverage);
    let frames = hot.len();
    assert!((greedy.fast_frames as f64 / frames as f64 - 0.2).abs() < 0.01);

    // Independent fast-frame oracle: every line of the frame in a fast region.
    let m = g.mapping();
    let fast: Vec<bool> = (0..frames as u64)
        .map(|f| {
            (0..PAGE_BYTES / 64)
                .all(|l| !map.is_slow(map.region_of(&m.decode(f * PAGE_BYTES + l * 64).unwrap()).unwrap()))
        })
        .collect();
    let total: u64 = hot.iter().sum();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut perm: Vec<usize> = (0..frames).collect();
    let best = (0..1000)
        .map(|_| {
            perm.shuffle(&mut rng);
            let covered: u64 = hot.iter().zip(&perm).filter(|(_, &f)| fast[f]).map(|(&h, _)| h).sum();
            covered as f64 / total as f64
        })
        .fold(0.0f64, f64::max);
    assert!(greedy.fast_coverage >= best, "{} < {best}", greedy.fast_coverage);
}
