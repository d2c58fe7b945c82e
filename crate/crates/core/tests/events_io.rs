use evgraph::error::Error;
use evgraph::events::{
    generate_synthetic, parse_events, subsample_random, subsample_uniform, window, write_bin, write_csv, Event,
    EventFormat, EventList, Pattern, Resolution, SynthParams,
};
use proptest::prelude::*;

#[test]
fn csv_maps_zero_polarity_and_skips_header() {
    let ev = parse_events(b"x,y,t,p\n3,4,100,1\n5,6,200,0\n", EventFormat::Csv, Some(Resolution::new(10, 10))).unwrap();
    assert_eq!(ev.events(), &[Event::new(3, 4, 100, 1), Event::new(5, 6, 200, -1)]);
}

#[test]
fn out_of_order_csv_is_sorted_stably() {
    let ev = parse_events(b"1,2,300,1\n2,2,200,1\n3,2,300,0\n4,2,200,0\n", EventFormat::Csv, None).unwrap();
    let xs: Vec<u16> = ev.events().iter().map(|e| e.x).collect();
    assert_eq!(xs, [2, 4, 1, 3]);
}

#[test]
fn malformed_streams_are_rejected() {
    let res = Some(Resolution::new(10, 10));
    assert!(matches!(parse_events(b"1,2,3\n", EventFormat::Csv, res), Err(Error::Parse { .. })));
    assert!(matches!(parse_events(b"1,2,3,7\n", EventFormat::Csv, res), Err(Error::Parse { .. })));
    assert!(parse_events(b"10,2,3,1\n", EventFormat::Csv, res).is_err());
    assert!(parse_events(b"AEGN\x01\x00", EventFormat::Bin, None).is_err());
    assert!(parse_events(b"XXXX\x01\x00\x0a\x00\x0a\x00\x00\x00\x00\x00\x00\x00", EventFormat::Bin, None).is_err());
}

#[test]
fn synthetic_streams_are_deterministic_and_valid() {
    let p = SynthParams::with_count(Resolution::new(40, 30), 500_000, 3000, 42);
    for pattern in [Pattern::MovingEdge, Pattern::RandomNoise, Pattern::Mixed] {
        let a = generate_synthetic(pattern, &p).unwrap();
        assert_eq!(a, generate_synthetic(pattern, &p).unwrap());
        assert_eq!(a.len(), 3000);
        assert!(a.events().windows(2).all(|w| w[0].t <= w[1].t));
        assert!(a.events().iter().all(|e| e.x < 40 && e.y < 30 && e.t < 500_000 && (e.p == 1 || e.p == -1)));
    }
    let mut q = p.clone();
    q.seed = 43;
    assert_ne!(generate_synthetic(Pattern::Mixed, &p).unwrap(), generate_synthetic(Pattern::Mixed, &q).unwrap());
    let mut zero = p;
    zero.resolution = Resolution::new(0, 0);
    assert!(matches!(generate_synthetic(Pattern::Mixed, &zero), Err(Error::InvalidParameter(_))));
}

#[test]
fn subsampling_and_windowing() {
    let p = SynthParams::with_count(Resolution::new(16, 16), 1_000_000, 1000, 1);
    let ev = generate_synthetic(Pattern::RandomNoise, &p).unwrap();
    let u = subsample_uniform(&ev, 10).unwrap();
    assert_eq!(u.len(), 100);
    assert_eq!(u.events()[1], ev.events()[10]);
    let r = subsample_random(&ev, 10, 5).unwrap();
    assert_eq!(r, subsample_random(&ev, 10, 5).unwrap());
    assert!(r.events().windows(2).all(|w| w[0].t <= w[1].t));
    assert!(subsample_uniform(&ev, 0).is_err());
    let w = window(&ev, 100_000, 600_000).unwrap();
    let want = ev.events().iter().filter(|e| e.t > 500_000 && e.t <= 600_000).count();
    assert_eq!(w.len(), want);
    assert!(w.events().iter().all(|e| e.t > 500_000 && e.t <= 600_000));
    assert!(!w.is_empty());
}

proptest! {
    #[test]
    fn both_formats_round_trip(raw in prop::collection::vec((0u16..50, 0u16..40, 0u64..1000, any::<bool>()), 0..200)) {
        let mut t = 0;
        let events: Vec<Event> = raw.iter().map(|&(x, y, dt, p)| { t += dt; Event::new(x, y, t, if p { 1 } else { -1 }) }).collect();
        let ev = EventList::new(events, Resolution::new(50, 40)).unwrap();
        let mut csv = Vec::new();
        write_csv(&ev, &mut csv).unwrap();
        prop_assert_eq!(&parse_events(&csv, EventFormat::Csv, Some(ev.resolution())).unwrap(), &ev);
        let mut bin = Vec::new();
        write_bin(&ev, &mut bin).unwrap();
        prop_assert_eq!(bin.len(), 16 + 13 * ev.len());
        prop_assert_eq!(&parse_events(&bin, EventFormat::Bin, None).unwrap(), &ev);
    }
}
