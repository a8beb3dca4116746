use proptest::prelude::*;

use qpc_core::adversary::AttackModel;
use qpc_core::protocol::{
    encrypt_group, group_secret, prepare_carrier, run_protocol, tp_decode, ProtocolConfig, Secret, Verdict,
};
use qpc_core::quantum::Basis;
use qpc_core::rng::seeded;
use qpc_core::BitString;

const NORM_TOL: f64 = 1e-12;

fn bits(max: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), 1..=max).prop_map(BitString::new)
}

fn config_and_secrets() -> impl Strategy<Value = (ProtocolConfig, BitString, BitString)> {
    (2usize..=8)
        .prop_flat_map(|len| (Just(len), 2..=len, prop::collection::vec(any::<bool>(), len), prop::collection::vec(any::<bool>(), len)))
        .prop_map(|(len, n, x, y)| (ProtocolConfig::new(len, n).with_decoys(4), BitString::new(x), BitString::new(y)))
}

proptest! {
    #[test]
    fn carriers_are_normalized(g in bits(8), mask in any::<bool>()) {
        let s = prepare_carrier(&encrypt_group(&g, mask)).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() <= NORM_TOL);
        prop_assert_eq!(s.qubit_count(), g.len() + 1);
    }

    #[test]
    fn xor_of_complements_equals_xor(a in bits(12), seed in any::<u64>()) {
        let b: BitString = (0..a.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        prop_assert_eq!(&a.complement() ^ &b.complement(), &a ^ &b);
        prop_assert!((&a ^ &a.complement()).iter().all(|x| x));
    }

    #[test]
    fn decode_recovers_masked_group_on_either_branch(g in bits(7), mask in any::<bool>(), flag in any::<bool>(), key in any::<bool>()) {
        let carrier = prepare_carrier(&encrypt_group(&g, mask)).unwrap();
        let measured = carrier.project(0, Basis::Z, flag).unwrap().measure_all_z(&mut seeded(0));
        let record = tp_decode(&measured, key).unwrap();
        // decoded = G xor mask xor key, independent of the branch
        prop_assert_eq!(record.m2_prime, g.flip_if(mask ^ key));
    }

    #[test]
    fn honest_verdict_matches_equality((config, x, y) in config_and_secrets(), seed in any::<u64>(), same in any::<bool>()) {
        let x = Secret::from_bits(x).unwrap();
        let y = if same { x.clone() } else { Secret::from_bits(y).unwrap() };
        let out = run_protocol(&config, &x, &y, &AttackModel::honest(), &mut seeded(seed)).unwrap();
        let expected = if x == y { Verdict::Equal } else { Verdict::Unequal };
        prop_assert_eq!(out.verdict, expected);
    }

    #[test]
    fn verdict_is_independent_of_the_measured_branch((config, x, y) in config_and_secrets(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let x = Secret::from_bits(x).unwrap();
        let y = Secret::from_bits(y).unwrap();
        let a = run_protocol(&config, &x, &y, &AttackModel::honest(), &mut seeded(s1)).unwrap();
        let b = run_protocol(&config, &x, &y, &AttackModel::honest(), &mut seeded(s2)).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.per_group_rc, b.per_group_rc);
    }

    #[test]
    fn tp_sees_groups_masked_by_shared_key((config, x, y) in config_and_secrets(), seed in any::<u64>()) {
        let x = Secret::from_bits(x).unwrap();
        let y = Secret::from_bits(y).unwrap();
        let out = run_protocol(&config, &x, &y, &AttackModel::honest(), &mut seeded(seed)).unwrap();
        let truth = out.truth.unwrap();
        let view = out.tp_view.unwrap();
        let ga = group_secret(&x, config.group_size).unwrap();
        let gb = group_secret(&y, config.group_size).unwrap();
        for i in 0..config.group_count() {
            let k = truth.keys.k_ab[i];
            prop_assert_eq!(&view.alice[i].m2_prime, &ga.groups[i].flip_if(k));
            prop_assert_eq!(&view.bob[i].m2_prime, &gb.groups[i].flip_if(k));
            prop_assert_eq!(&out.per_group_rc[i], &(&ga.groups[i] ^ &gb.groups[i]));
        }
    }
}
