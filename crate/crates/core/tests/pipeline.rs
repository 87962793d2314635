use flydram::controller::{
    build_region_map, compress_slow_set, export_region_map, import_region_map, lookup_timing, Granularity, LatencySteps,
};
use flydram::device::{generate_profile, TimingParams, VariationParams};
use flydram::profiler::{read_ber_csv, run_characterization, write_ber_csv, Param, SweepConfig};
use flydram::{Geometry, Latency};

fn geometry() -> Geometry {
    Geometry { channels: 1, ranks_per_channel: 1, banks_per_rank: 4, rows_per_bank: 256, ..Geometry::default() }
}

#[test]
fn region_map_file_round_trip() {
    let g = geometry();
    let p = generate_profile(&g, &VariationParams::default(), 3).unwrap();
    for gr in [Granularity::CachelineGroup(16), Granularity::Row, Granularity::Bank] {
        let map = build_region_map(&p, gr, &LatencySteps::ddr3_default(), 1).unwrap();
        let mut bytes = Vec::new();
        export_region_map(&map, &mut bytes).unwrap();
        let back = import_region_map(&bytes[..], &g, &TimingParams::ddr3_1333h()).unwrap();
        for line in (0..g.total_lines()).step_by(97) {
            let loc = g.line_location(line);
            assert_eq!(lookup_timing(&back, &loc).unwrap(), lookup_timing(&map, &loc).unwrap());
        }
        let mut again = Vec::new();
        export_region_map(&back, &mut again).unwrap();
        assert_eq!(again, bytes);
    }
}

#[test]
fn filter_never_grants_less_than_the_map() {
    let g = geometry();
    let p = generate_profile(&g, &VariationParams { base_fast_fraction: 0.7, ..Default::default() }, 4).unwrap();
    let map = build_region_map(&p, Granularity::Row, &LatencySteps::ddr3_default(), 0).unwrap();
    let filter = compress_slow_set(&map, 0.05).unwrap();
    for line in 0..g.total_lines() {
        let loc = g.line_location(line);
        assert!(lookup_timing(&map, &loc).unwrap().core_le(&filter.lookup_timing(&loc).unwrap()));
    }
    assert!(filter.storage_bytes() < map.storage_bytes());
}

#[test]
fn characterization_independent_of_thread_count() {
    let g = geometry();
    let p = generate_profile(&g, &VariationParams { jitter_sigma_ns: 0.3, ..Default::default() }, 5).unwrap();
    let sweep = SweepConfig::only(Param::Trcd, vec![Latency::from_ns(7.5), Latency::from_ns(10.0)]);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_characterization(&p, &sweep, 9).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));

    let mut bytes = Vec::new();
    write_ber_csv(&one.table, &mut bytes).unwrap();
    assert_eq!(read_ber_csv(&bytes[..]).unwrap(), one.table);
}
