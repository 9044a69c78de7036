use super::completion::{shadow_sweep, CompletionOracle};
use super::*;
use crate::modular::Modulus;
use crate::oracle::{brute_force_series, brute_force_series_bbox};
use crate::signature::pack;

fn counts(max_width: usize) -> Vec<u64> {
    let e = enumerate(&EnumerateOptions::new(max_width)).unwrap();
    e.exact.iter().map(|(_, v)| v.try_into().unwrap()).collect()
}

fn run(opts: EnumerateOptions) -> ExactSeries {
    enumerate(&opts).unwrap().exact
}

#[test]
fn smallest_enumerations() {
    assert_eq!(counts(2), vec![1, 2]);
    assert_eq!(counts(4), vec![1, 2, 7, 28, 124, 588]);
}

#[test]
fn width_two_harvests() {
    let config = SweepConfig::new(2, 2, Moduli::standard_prefix(1)).unwrap();
    let out = sweep_width(&config, &SweepOptions::default()).unwrap();
    assert!(out.complete);
    let l2 = &out.result.per_length[&2];
    assert_eq!(
        (l2.min_degree(), l2.max_degree(), l2.coeff(4, 0)),
        (Some(4), Some(4), 1)
    );
    let l3 = &out.result.per_length[&3];
    assert_eq!(
        (l3.min_degree(), l3.max_degree(), l3.coeff(6, 0)),
        (Some(6), Some(6), 1)
    );
}

#[test]
fn width_three_matches_bounding_box_oracle() {
    let max_width = 4;
    let config = SweepConfig::new(3, max_width, Moduli::standard_prefix(1)).unwrap();
    let out = sweep_width(&config, &SweepOptions::default()).unwrap();
    let n_max = config.max_degree;
    let table = brute_force_series_bbox(n_max, 3).unwrap();
    for length in 3..=config.max_length {
        let harvested = out.result.per_length.get(&length);
        for n in (4..=n_max).step_by(2) {
            let got = harvested.map_or(0, |p| p.coeff(n, 0));
            let want = table
                .get(&(length as u32))
                .and_then(|m| m.get(&n))
                .copied()
                .unwrap_or(0);
            assert_eq!(got, want, "L = {length}, n = {n}");
        }
    }
}

#[test]
fn matches_oracle_up_to_n_18() {
    let e = run(EnumerateOptions::new(5));
    assert_eq!(e.first_mismatch(&brute_force_series(18).unwrap()), None);
}

#[test]
fn extension_keeps_lower_terms() {
    let small = run(EnumerateOptions::new(4));
    let big = run(EnumerateOptions::new(5));
    assert_eq!(big.truncated(14), small);
}

#[test]
fn pruning_and_simplification_preserve_counts() {
    let base = run(EnumerateOptions::new(5));
    let no_prune = run(EnumerateOptions {
        pruning: false,
        ..EnumerateOptions::new(5)
    });
    let kink = run(EnumerateOptions {
        kink_simplification: true,
        ..EnumerateOptions::new(5)
    });
    assert_eq!(base, no_prune);
    assert_eq!(base, kink);
}

#[test]
fn multiple_moduli_agree() {
    let one = run(EnumerateOptions {
        moduli: Moduli::standard_prefix(1),
        force: true,
        ..EnumerateOptions::new(4)
    });
    let three = run(EnumerateOptions {
        moduli: Moduli::standard(),
        ..EnumerateOptions::new(4)
    });
    assert_eq!(one, three);
}

#[test]
fn thread_count_does_not_change_output() {
    let one = enumerate(&EnumerateOptions::new(5)).unwrap();
    let four = enumerate(&EnumerateOptions {
        threads: 4,
        ..EnumerateOptions::new(5)
    })
    .unwrap();
    assert_eq!(one.residues, four.residues);
    assert_eq!(one.exact, four.exact);
}

#[test]
fn insufficient_moduli_refused() {
    let opts = EnumerateOptions {
        moduli: Moduli::new(vec![Modulus::new(1 << 20).unwrap()]).unwrap(),
        ..EnumerateOptions::new(4)
    };
    assert!(matches!(
        enumerate(&opts),
        Err(EngineError::InsufficientModuli { .. })
    ));
    let forced = enumerate(&EnumerateOptions { force: true, ..opts }).unwrap();
    assert_eq!(forced.warnings.len(), 1);
}

#[test]
fn stored_signatures_are_valid() {
    let config = SweepConfig::new(4, 5, Moduli::standard_prefix(1)).unwrap();
    let mut state = initial_state(&config);
    let mut site = state.position().next(config.width);
    while site.column <= config.max_length {
        state = update_site(&state, site, &config).unwrap().state;
        state.validate().unwrap();
        for key in state.keys() {
            assert_ne!(key.edge(config.width), 0xff);
            // an odd number of edges can never occur
            let sig = unpack(key, config.edges()).unwrap();
            assert_eq!(sig.occupied_count() % 2, 0);
        }
        site = site.next(config.width);
    }
}

#[test]
fn update_site_rejects_out_of_order() {
    let config = SweepConfig::new(3, 3, Moduli::standard_prefix(1)).unwrap();
    let state = initial_state(&config);
    assert!(matches!(
        update_site(&state, Site { row: 2, column: 1 }, &config),
        Err(EngineError::OutOfOrder { .. })
    ));
    assert!(update_site(&state, Site { row: 1, column: 1 }, &config).is_ok());
}

#[test]
fn site_by_site_matches_sweep() {
    let config = SweepConfig::new(3, 4, Moduli::standard_prefix(1)).unwrap();
    let out = sweep_width(&config, &SweepOptions::default()).unwrap();
    let mut state = initial_state(&config);
    let mut per_length = BTreeMap::new();
    let mut site = Site { row: 1, column: 1 };
    while site.column <= config.max_length {
        let up = update_site(&state, site, &config).unwrap();
        if !up.harvest.is_zero() {
            per_length
                .entry(site.column)
                .or_insert_with(|| TruncatedPoly::zero(1))
                .add_shifted_unchecked(&up.harvest, 0, config.max_degree, config.moduli.as_slice());
        }
        state = up.state;
        site = site.next(config.width);
    }
    assert_eq!(per_length, out.result.per_length);
}

#[test]
fn pruning_bound_is_sound() {
    for width in 2..=4 {
        let config = SweepConfig::new(width, width + 1, Moduli::standard_prefix(1)).unwrap();
        let mut oracle = CompletionOracle::new(&config);
        let mut checked = 0;
        shadow_sweep(&config, |site, key, _| {
            let mut codes = [0u8; MAX_EDGES];
            key.decode_into(config.edges(), &mut codes);
            let bound = bound_of_codes(
                &codes[..config.edges()],
                key.touched_bottom(),
                key.touched_top(),
                BoundaryShape::AfterRow(site.row),
                site.column as u32,
                width as u32,
            );
            if let Some(c) = oracle.minimal_completion(key, site) {
                assert!(
                    bound.total <= c,
                    "W = {width} {site:?} {key:?}: bound {bound:?} > {c}"
                );
                checked += 1;
            }
        });
        assert!(checked > 0);
    }
}

#[test]
fn minimal_completion_examples() {
    let config = SweepConfig::new(4, 8, Moduli::standard_prefix(1)).unwrap();
    let mut oracle = CompletionOracle::new(&config);
    // a flat 1122 boundary after column 4 touching top and bottom
    let key = pack(&"11220".parse::<Signature>().unwrap().with_flags(true, true));
    let at = Site { row: 4, column: 4 };
    assert_eq!(oracle.minimal_completion(key, at), Some(6));
}

#[test]
fn checkpoint_resume_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let config = SweepConfig::new(4, 5, Moduli::standard()).unwrap();
    let full = sweep_width(&config, &SweepOptions::default()).unwrap();
    let opts = SweepOptions {
        threads: 1,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        stop_after_column: Some(3),
    };
    let partial = sweep_width(&config, &opts).unwrap();
    assert!(!partial.complete);
    let resumed = sweep_width(
        &config,
        &SweepOptions {
            stop_after_column: None,
            ..opts
        },
    )
    .unwrap();
    assert!(resumed.complete);
    assert_eq!(resumed.stats.resumed_from_column, Some(3));
    assert_eq!(resumed.result, full.result);
}

#[test]
fn checkpoint_rejects_other_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let config = SweepConfig::new(3, 4, Moduli::standard()).unwrap();
    let opts = SweepOptions {
        threads: 1,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        stop_after_column: Some(2),
    };
    sweep_width(&config, &opts).unwrap();
    let other = SweepConfig {
        pruning: false,
        ..config.clone()
    };
    let err = sweep_width(&other, &opts).unwrap_err();
    assert!(matches!(
        err,
        EngineError::Checkpoint(CheckpointError::Mismatch(_))
    ));
}

#[test]
fn checkpoint_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let config = SweepConfig::new(3, 4, Moduli::standard()).unwrap();
    let opts = SweepOptions {
        threads: 1,
        checkpoint_dir: Some(dir.path().to_path_buf()),
        stop_after_column: Some(2),
    };
    sweep_width(&config, &opts).unwrap();
    let path = checkpoint_path(dir.path(), 3);
    let snap = checkpoint_load(&path).unwrap();
    assert_eq!(snap.column, 2);
    let bytes = std::fs::read(&path).unwrap();

    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 1;
    assert!(matches!(
        SweepSnapshot::from_bytes(&flipped),
        Err(CheckpointError::Checksum | CheckpointError::Corrupt(_))
    ));

    let short = &bytes[..bytes.len() - 40];
    assert!(matches!(
        SweepSnapshot::from_bytes(short),
        Err(CheckpointError::Truncated | CheckpointError::Checksum)
    ));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        SweepSnapshot::from_bytes(&bad_magic),
        Err(CheckpointError::BadMagic)
    ));

    assert_eq!(SweepSnapshot::from_bytes(&snap.to_bytes()).unwrap(), snap);
}

#[test]
fn config_hash_distinguishes_settings() {
    let a = SweepConfig::new(3, 4, Moduli::standard()).unwrap();
    let b = SweepConfig {
        kink_simplification: true,
        ..a.clone()
    };
    let c = SweepConfig::new(3, 5, Moduli::standard()).unwrap();
    assert_ne!(a.config_hash(), b.config_hash());
    assert_ne!(a.config_hash(), c.config_hash());
    assert_eq!(a.config_hash(), a.clone().config_hash());
}

#[test]
fn invalid_widths_rejected() {
    assert!(SweepConfig::new(1, 3, Moduli::standard()).is_err());
    assert!(SweepConfig::new(4, 3, Moduli::standard()).is_err());
    assert!(SweepConfig::new(31, 31, Moduli::standard()).is_err());
    assert!(enumerate(&EnumerateOptions::new(1)).is_err());
}

#[test]
fn auto_moduli_is_minimal() {
    // 3^38 < 2^62
    assert_eq!(auto_moduli(38).len(), 1);
    assert_eq!(auto_moduli(66).len(), 2);
    assert_eq!(auto_moduli(130).len(), 3);
}
