mod common;

use proptest::prelude::*;

use impact_core::{overlap_segment, TimeInterval, Timestamp};

fn arb_interval() -> impl Strategy<Value = TimeInterval> {
    (0i64..10_000_000, 0i64..5_000_000).prop_map(|(s, len)| {
        TimeInterval::new(Timestamp::from_millis(s), Timestamp::from_millis(s + len)).unwrap()
    })
}

proptest! {
    #![proptest_config(common::prop_config(3))]

    #[test]
    fn overlap_is_commutative(a in arb_interval(), b in arb_interval()) {
        prop_assert_eq!(overlap_segment(&a, &b), overlap_segment(&b, &a));
    }

    #[test]
    fn overlap_lies_in_both(a in arb_interval(), b in arb_interval()) {
        if let Some(seg) = overlap_segment(&a, &b) {
            for iv in [a, b] {
                prop_assert!(iv.start <= seg.start && seg.end <= iv.end);
            }
            prop_assert!(seg.start < seg.end);
        } else {
            prop_assert!(a.end <= b.start || b.end <= a.start);
        }
    }

    #[test]
    fn self_overlap_is_identity(a in arb_interval()) {
        let seg = overlap_segment(&a, &a);
        if a.start < a.end {
            let seg = seg.unwrap();
            prop_assert_eq!((seg.start, seg.end), (a.start, a.end));
        } else {
            prop_assert!(seg.is_none());
        }
    }
}
