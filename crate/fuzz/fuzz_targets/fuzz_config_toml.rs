#![no_main]

use eb_fission::ExperimentFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = ExperimentFile::from_toml_str(text) {
        // anything accepted must survive a round trip
        let again = ExperimentFile::from_toml_str(&file.to_toml_string()).unwrap();
        assert_eq!(
            file.experiments().unwrap().len(),
            again.experiments().unwrap().len()
        );
    }
});
