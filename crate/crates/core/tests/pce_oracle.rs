mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskforge::features::{KnownFactorProfile, Race};
use riskforge::pce::{pce_risk, PceCoefficientTable};
use riskforge::ErrorKind;
use sha2::{Digest, Sha256};

fn profile(stratum: &str, age: f64, tc: f64, hdl: f64, sbp: f64, treated: bool, smoker: bool, dm: bool) -> KnownFactorProfile {
    KnownFactorProfile {
        patient_id: "p".into(),
        male: stratum.starts_with("male"),
        age,
        tc: Some(tc),
        hdl_c: Some(hdl),
        sbp: Some(sbp),
        hbp_treated: treated,
        smoker: Some(smoker),
        race: if stratum.ends_with("black") { Race::AfricanAmerican } else { Race::WhiteOrOther },
        diabetes: dm,
    }
}

const STRATA: [&str; 4] = ["male_white", "female_white", "male_black", "female_black"];

#[test]
fn coefficient_file_checksum() {
    let digest = hex::encode(Sha256::digest(PceCoefficientTable::builtin_source().as_bytes()));
    assert_eq!(digest, "2202728ae256f45a8fc6867f59bd5a136b6a22126a2fcdfde2decae8371f50f2");
}

#[test]
fn hand_profiles() {
    let table = PceCoefficientTable::builtin();
    for (s, age, tc, hdl, sbp, tr, sm, dm, want) in common::PCE_HAND_PROFILES {
        let got = pce_risk(&profile(s, age, tc, hdl, sbp, tr, sm, dm), &table).unwrap();
        assert!((got - want).abs() < 1e-6, "{s} {age}: {got} vs {want}");
    }
}

#[test]
fn published_example_to_one_decimal_percent() {
    let table = PceCoefficientTable::builtin();
    for (s, pct) in common::PCE_PUBLISHED_EXAMPLE {
        let got = pce_risk(&profile(s, 55.0, 213.0, 50.0, 120.0, false, false, false), &table).unwrap();
        assert!((got * 100.0 - pct).abs() <= 0.1, "{s}: {:.2}% vs {pct}%", got * 100.0);
    }
}

#[test]
fn random_profiles_match_reference() {
    let table = PceCoefficientTable::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..200 {
        let s = STRATA[i % 4];
        let (age, tc, hdl, sbp, tr, sm) = common::random_profile(&mut rng);
        let got = pce_risk(&profile(s, age, tc, hdl, sbp, tr, sm, true), &table).unwrap();
        let want = common::pce_reference(s, age, tc, hdl, sbp, tr, sm, true);
        assert!((got - want).abs() < 1e-9, "{s}: {got} vs {want}");
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn risk_rises_with_sbp_in_every_stratum() {
    // every stratum's net sbp coefficient is positive across ages 40-79
    let table = PceCoefficientTable::builtin();
    for s in STRATA {
        for treated in [false, true] {
            for age in [40.0, 55.0, 70.0, 79.0] {
                let mut last = 0.0;
                for sbp in (90..=200).step_by(10) {
                    let r = pce_risk(&profile(s, age, 200.0, 50.0, f64::from(sbp), treated, false, true), &table).unwrap();
                    assert!(r > last, "{s} age {age} sbp {sbp}");
                    last = r;
                }
            }
        }
    }
}

#[test]
fn missing_and_invalid_inputs() {
    let table = PceCoefficientTable::builtin();
    let mut p = profile("male_white", 55.0, 213.0, 50.0, 120.0, false, false, true);
    p.hdl_c = None;
    assert_eq!(pce_risk(&p, &table).unwrap_err().kind(), ErrorKind::Data);
    p.hdl_c = Some(0.0);
    assert!(matches!(pce_risk(&p, &table), Err(riskforge::Error::Domain(_))));
}
