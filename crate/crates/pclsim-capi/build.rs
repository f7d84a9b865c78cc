//! Regenerates `include/pclsim.h` from the extern "C" surface. The header
//! is committed so downstream C builds never need cbindgen themselves; if
//! generation fails (e.g. no cbindgen in a vendored build), the committed
//! header remains authoritative.

fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("cargo sets CARGO_MANIFEST_DIR");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/pclsim.h"));
        }
        Err(e) => println!("cargo:warning=skipping header regeneration: {e}"),
    }
}
