use proptest::prelude::*;

use semiclassical_cli::table::num;
use semiclassical_cli::Table;

proptest! {
    #[test]
    fn tables_round_trip_bit_for_bit(
        rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 0..20),
        hash in "[0-9a-f]{64}",
    ) {
        let mut table = Table::new(&["a", "b", "c"]);
        table.meta("scenario_sha256", &hash).meta("maslov", "0;1;0");
        for r in &rows {
            table.push(r.iter().map(|v| num(*v)).collect());
        }
        let back = Table::parse(&table.render()).unwrap();
        prop_assert_eq!(&back, &table);
        for (k, name) in ["a", "b", "c"].iter().enumerate() {
            let col = back.floats(name).unwrap();
            for (v, r) in col.iter().zip(&rows) {
                prop_assert!(v.to_bits() == r[k].to_bits() || (v.is_nan() && r[k].is_nan()));
            }
        }
    }
}
