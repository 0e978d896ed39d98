use log::{Level, LevelFilter, Log, Metadata, Record};

/// Plain stderr logger: `warning: ...` and untagged info lines.
struct Stderr;

impl Log for Stderr {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= log::max_level()
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        match record.level() {
            Level::Error => eprintln!("error: {}", record.args()),
            Level::Warn => eprintln!("warning: {}", record.args()),
            _ => eprintln!("{}", record.args()),
        }
    }

    fn flush(&self) {}
}

static LOGGER: Stderr = Stderr;

pub fn init(quiet: bool) {
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(if quiet { LevelFilter::Error } else { LevelFilter::Info });
    }
}
