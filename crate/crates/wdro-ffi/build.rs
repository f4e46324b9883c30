fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("cargo sets CARGO_MANIFEST_DIR");
    let header = std::path::Path::new(&crate_dir).join("include").join("wdro.h");
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("WDRO_H".into()),
        cpp_compat: true,
        documentation: true,
        enumeration: cbindgen::EnumConfig { prefix_with_name: true, ..Default::default() },
        ..Default::default()
    };
    match cbindgen::Builder::new().with_crate(&crate_dir).with_config(config).generate() {
        Ok(bindings) => {
            bindings.write_to_file(header);
        }
        Err(e) => {
            // keep builds working (e.g. doc builds) even if generation fails
            println!("cargo:warning=header generation failed: {e}");
        }
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
}
