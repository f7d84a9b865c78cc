fn main() {
    // The fast GEMM path links the system BLAS. Debian/Ubuntu ship it as
    // libopenblas.{so,a} in the default linker search path; other distros may
    // need RUSTFLAGS="-L <dir>".
    if std::env::var_os("CARGO_FEATURE_OPENBLAS").is_some() {
        println!("cargo:rustc-link-lib=dylib=openblas");
    }
    println!("cargo:rerun-if-changed=build.rs");
}
