//! File formats consumed by the plotting scripts and external tools.

use mlc_core::allocation::{allocate, PowerAllocation, Scheme};
use mlc_core::capacity::RATIO_CSV_HEADER;
use mlc_core::channel::{build_convolution_matrix, ChannelModel, H1_TAPS};
use mlc_core::experiments::{
    parse_cli, render, CsvTable, CAPACITY_CSV_HEADER, SWEEP_CSV_HEADER,
};
use mlc_core::lmmse::{design_filter, EquivalentChannel};
use mlc_core::mlc::{simulate_rates, FeedbackMode, RATE_PROFILE_CSV_HEADER};

fn rendered(args: &[&str]) -> CsvTable {
    let config = parse_cli(["mlc"].iter().chain(args).copied().chain(["--out", "unused.csv"])).unwrap();
    CsvTable::parse(&render(&config).unwrap()).unwrap()
}

fn columns(header: &str) -> Vec<String> {
    header.split(',').map(str::to_string).collect()
}

#[test]
fn theorem1_csv_schema() {
    let t = rendered(&["--experiment", "theorem1", "--half-window", "10", "--snr-db", "0,-20"]);
    assert_eq!(t.columns, columns(RATIO_CSV_HEADER));
    assert_eq!(
        RATIO_CSV_HEADER,
        "input_sinr_db,sigma_z_over_w,lmmse_rate_bits,isi_rate_bits,ratio"
    );
    assert_eq!(t.rows.len(), 2 * 3);
    assert_eq!(t.meta("experiment"), Some("theorem1"));
    assert_eq!(t.meta("half_window"), Some("10"));
    for r in t.numbers("ratio").unwrap() {
        assert!(r > 0.0 && r <= 1.0 + 1e-9);
    }
    let sigma: Vec<f64> = t.numbers("sigma_z_over_w").unwrap();
    assert!(sigma.iter().all(|s| [0.1, 1.0, 10.0].contains(s)));
}

#[test]
fn sweep_csv_schema() {
    let t = rendered(&[
        "--experiment", "rate-sweep", "--channel", "h1", "--snr-db", "0", "--layers", "2,4",
        "--samples", "500", "--half-window", "5",
    ]);
    assert_eq!(SWEEP_CSV_HEADER, "snr_db,layers,scheme,r_mlc_bits,stderr_bits,capacity_bits");
    assert_eq!(t.columns, columns(SWEEP_CSV_HEADER));
    assert_eq!(t.rows.len(), 2);
    let scheme = t.column("scheme").unwrap();
    assert!(t.rows.iter().all(|r| r[scheme] == "equal-power"));
    for key in ["experiment", "version", "channel", "taps", "noise_variance", "half_window", "seed", "samples", "feedback"] {
        assert!(t.meta(key).is_some(), "missing metadata `{key}`");
    }
    let r = t.numbers("r_mlc_bits").unwrap();
    let c = t.numbers("capacity_bits").unwrap();
    assert!(r.iter().zip(&c).all(|(r, c)| *r > 0.0 && r < c));
}

#[test]
fn allocation_compare_lists_every_scheme() {
    let t = rendered(&[
        "--experiment", "allocation-compare", "--channel", "h1", "--snr-db", "5", "--layers", "3",
        "--samples", "500", "--half-window", "5",
    ]);
    assert_eq!(t.columns, columns(SWEEP_CSV_HEADER));
    let scheme = t.column("scheme").unwrap();
    let names: Vec<&str> = t.rows.iter().map(|r| r[scheme].as_str()).collect();
    for s in Scheme::ALL {
        assert!(names.contains(&s.name()), "{names:?}");
    }
}

#[test]
fn capacity_csv_schema() {
    let t = rendered(&["--experiment", "capacity", "--channel", "h1"]);
    assert_eq!(t.columns, columns(CAPACITY_CSV_HEADER));
    let snr = t.numbers("snr_db").unwrap();
    let cap = t.numbers("capacity_bits").unwrap();
    assert_eq!(snr.first(), Some(&-10.0));
    assert_eq!(snr.last(), Some(&20.0));
    assert!(cap.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn allocation_json_wire_format() {
    let ch = ChannelModel::new(H1_TAPS.to_vec(), 1.0).unwrap();
    let a = allocate(Scheme::EqualRate, 4, 10.0, &ch, 20).unwrap();
    let v: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
    assert_eq!(v["scheme"], "equal-rate");
    assert_eq!(v["M"], 4);
    assert_eq!(v["total_power"], 10.0);
    assert!(v["target_rate"].as_f64().unwrap() > 0.0);
    assert_eq!(v["powers"].as_array().unwrap().len(), 4);
    assert_eq!(PowerAllocation::from_json(&a.to_json()).unwrap(), a);

    let ep = allocate(Scheme::EqualPower, 2, 2.0, &ch, 0).unwrap();
    let v: serde_json::Value = serde_json::from_str(&ep.to_json()).unwrap();
    assert!(v["target_rate"].is_null());
}

#[test]
fn allocation_json_rejects_inconsistent_records() {
    for bad in [
        r#"{"scheme":"equal-power","M":3,"total_power":2,"target_rate":null,"powers":[1,1]}"#,
        r#"{"scheme":"equal-power","M":2,"total_power":5,"target_rate":null,"powers":[1,1]}"#,
        r#"{"scheme":"equal-power","M":2,"total_power":2,"target_rate":null,"powers":[2,0]}"#,
        r#"{"scheme":"greedy","M":2,"total_power":2,"target_rate":null,"powers":[1,1]}"#,
        r#"{"scheme":"equal-power","M":2,"total_power":2,"target_rate":null,"powers":[1,1],"x":1}"#,
    ] {
        assert!(PowerAllocation::from_json(bad).is_err(), "{bad}");
    }
}

#[test]
fn equivalent_channel_json() {
    let ch = ChannelModel::new(H1_TAPS.to_vec(), 1.0).unwrap();
    let conv = build_convolution_matrix(&ch, 6).unwrap();
    let powers = [4.0, 2.0, 1.0];
    let records: Vec<EquivalentChannel> = (0..3)
        .map(|m| design_filter(&conv, &powers[m..], 1.0).unwrap().equivalent_channel())
        .collect();
    let text = EquivalentChannel::to_json(&records);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let first = &v.as_array().unwrap()[0];
    for key in ["layer", "gain", "noise_variance", "layer_power"] {
        assert!(first.get(key).is_some(), "missing `{key}`");
    }
    assert_eq!(first["layer"], 1);
    assert_eq!(EquivalentChannel::from_json(&text).unwrap(), records);
}

#[test]
fn rate_profile_exports() {
    let ch = ChannelModel::new(H1_TAPS.to_vec(), 1.0).unwrap();
    let (profile, _) = simulate_rates(&ch, &[3.0, 1.0], 4, 2000, FeedbackMode::Genie, 2).unwrap();
    let table = CsvTable::parse(&profile.to_csv()).unwrap();
    assert_eq!(table.columns, columns(RATE_PROFILE_CSV_HEADER));
    assert_eq!(table.numbers("layer").unwrap(), vec![1.0, 2.0]);
    let v: serde_json::Value = serde_json::from_str(&profile.to_json()).unwrap();
    assert_eq!(v["layers"].as_array().unwrap().len(), 2);
    assert!((v["total"].as_f64().unwrap() - profile.per_layer().iter().sum::<f64>()).abs() < 1e-12);
}
