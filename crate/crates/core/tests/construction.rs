use polarbf::crc::Crc;
use polarbf::flip::build_critical_set;
use polarbf::polar::CodeConfig;

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn frozen_sets_match_exact_rational_fixtures() {
    for (name, n, k, crc) in [
        ("frozen_8_4.txt", 8, 4, Crc::NONE),
        ("frozen_16_8.txt", 16, 8, Crc::NONE),
        ("frozen_64_32.txt", 64, 32, Crc::CRC6),
    ] {
        let expected = CodeConfig::from_fixture(&fixture(name), crc).unwrap();
        let built = CodeConfig::construct_with_crc(n, k, 0.5, crc).unwrap();
        assert_eq!(built.frozen_set(), expected.frozen_set(), "{name}");
        assert_eq!(built.info_set(), expected.info_set(), "{name}");
    }
}

#[test]
fn fixture_text_round_trips() {
    let cfg = CodeConfig::construct(64, 32, 0.5).unwrap();
    let again = CodeConfig::from_fixture(&cfg.to_fixture(), Crc::CRC6).unwrap();
    assert_eq!(again.info_set(), cfg.info_set());
}

#[test]
fn code_64_32_information_set() {
    let cfg = CodeConfig::construct(64, 32, 0.5).unwrap();
    assert_eq!(
        cfg.info_set(),
        &[
            15, 23, 26, 27, 28, 29, 30, 31, 38, 39, 41, 42, 43, 44, 45, 46, 47, 49, 50, 51, 52, 53, 54, 55, 56,
            57, 58, 59, 60, 61, 62, 63
        ]
    );
    assert_eq!(cfg.payload_len(), 26);
    assert!((cfg.rate() - 0.5).abs() < 1e-15);
}

#[test]
fn critical_set_of_small_and_standard_codes() {
    let toy = CodeConfig::from_info_set(8, &[3, 5, 6, 7], Crc::NONE).unwrap();
    assert_eq!(build_critical_set(&toy).indices(), &[3, 5, 6]);
    let cfg = CodeConfig::construct(64, 32, 0.5).unwrap();
    let cs = build_critical_set(&cfg);
    assert_eq!(
        cs.indices(),
        &[15, 23, 26, 28, 38, 41, 42, 44, 49, 50, 52, 56]
    );
    assert!(cs.indices().iter().all(|&i| cfg.is_info(i)));
}
