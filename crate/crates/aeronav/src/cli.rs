//! Command-line entry point. Placeholder while lower layers land.

pub fn run() -> i32 {
    eprintln!("aeronav: not yet wired");
    64
}
