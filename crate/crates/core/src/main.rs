use std::io;

use soundkit::cli::{run, Environment};

fn main() {
    let env = Environment::from_process();
    let code = run(std::env::args_os().skip(1), &env, &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
