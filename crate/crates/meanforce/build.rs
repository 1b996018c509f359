fn main() {
    // The discrete-bath oracle calls LAPACK's dsyevr for the large symmetric
    // eigenproblem; the system OpenBLAS provides the implementation.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
