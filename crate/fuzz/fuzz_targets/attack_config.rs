#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| msfadv_fuzz::checks::attack_config(data));
