use ndauto::container::{deserialize, serialize};
use ndauto::{Array, Precision};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn roundtrip_is_bitwise_lossless(
        dims in prop::collection::vec(1usize..5, 0..4),
        values in prop::collection::vec(-1e6f64..1e6, 0..64),
        single in any::<bool>(),
    ) {
        let numel: usize = dims.iter().product();
        let mut data = values;
        data.resize(numel, 0.5);
        let precision = if single { Precision::Single } else { Precision::Double };
        let a = Array::from_vec_prec(&dims, data, precision).unwrap();
        let records = vec![("x".to_string(), a)];
        let bytes = serialize(&records);
        let back = deserialize(&bytes).unwrap();
        prop_assert_eq!(&records, &back);
        prop_assert_eq!(serialize(&back), bytes);
    }
}
