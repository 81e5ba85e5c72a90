//! Drives the command-line interface in process: simulate a path, fit it,
//! then refit the noise from the recovered increments.

use std::fs;

use carma_levy::cli;

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path();
    let model = root.join("model.json");
    fs::write(
        &model,
        r#"{"p":2,"q":1,"a":[1.39631,0.05029],"b":[1.0,2.0],
            "noise":{"family":"VarianceGamma","params":{"lambda":1,"alpha":1,"beta":0,"mu":0}}}"#,
    )
    .expect("write model");
    let p = |name: &str| root.join(name).to_string_lossy().into_owned();
    let m = model.to_string_lossy().into_owned();

    let steps: [Vec<String>; 3] = [
        [
            "simulate",
            "--spec",
            &m,
            "--out",
            &p("sim"),
            "--terminal",
            "1000",
            "--n",
            "10000",
            "--seed",
            "4",
        ]
        .map(String::from)
        .to_vec(),
        [
            "fit",
            "--spec",
            &m,
            "--data",
            &p("sim/path.csv"),
            "--out",
            &p("fit"),
            "--normalization",
            "b0",
        ]
        .map(String::from)
        .to_vec(),
        [
            "fit-noise",
            "--data",
            &p("fit/increments.csv"),
            "--out",
            &p("noise"),
            "--family",
            "vg",
        ]
        .map(String::from)
        .to_vec(),
    ];
    for args in steps {
        let code = cli::run(std::iter::once("carma-levy".to_string()).chain(args.iter().cloned()));
        println!("carma-levy {} -> exit {code}", args[0]);
        if code != 0 {
            std::process::exit(code);
        }
    }
    let report = fs::read_to_string(root.join("noise/noise_fit.json")).expect("noise report");
    println!("{report}");
}
