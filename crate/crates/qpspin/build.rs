fn main() {
    // System OpenBLAS ships the full LAPACK symbol set, including the
    // two-stage eigenvalue drivers used by the dense engine.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
