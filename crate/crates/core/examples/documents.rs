//! Writes a system document, reads it back and drives the command-line
//! front end in process. Same output as the `symspec` binary.

use symspec::cli::{build_example, load_system, run, save_system, ExampleParams, Family};
use symspec::BoundaryMatrix;

fn main() {
    let dir = std::env::temp_dir().join("symspec-documents-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sl.json");

    let neumann = BoundaryMatrix::from_real_rows(1, &[1.0, 0.0]).unwrap();
    let params = ExampleParams { v: vec![0.0, 1.0, 2.0], a: None, b: None, horizon: None };
    let doc = build_example(Family::SlScalar, &params, Some(&neumann), Some(&neumann)).unwrap();
    save_system(&path, &doc).unwrap();
    let loaded = load_system(&path).unwrap();
    println!("wrote {} (n = {}, N = {})", path.display(), loaded.system.n(), loaded.system.horizon());

    for args in [
        vec!["validate"],
        vec!["spectrum"],
        vec!["mfunction", "--lambda", "1,1", "--check-representation"],
        vec!["spectral-fn"],
    ] {
        let mut argv = vec!["symspec", args[0], path.to_str().unwrap()];
        argv.extend_from_slice(&args[1..]);
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(argv.iter().copied(), &mut out, &mut err);
        println!("$ {}  -> exit {code}", argv.join(" "));
        print!("{}{}", String::from_utf8_lossy(&out), String::from_utf8_lossy(&err));
    }
}
