//! Synthetic inputs for the benchmarks: Ghidra-shaped sources, diagnostics
//! and result records of configurable size.

use std::collections::BTreeMap;

use a4d_core::report::RecordStatus;
use a4d_core::{
    binary_id, ConstraintLevel, CorpusRecord, Diagnostics, FailedTest, OptLevel, Origin, ProcessExit, SourceUnit,
    TestCase, UnitKind,
};

/// A decompiler-style translation unit with `functions` helpers plus main.
pub fn ghidra_source(functions: usize) -> SourceUnit {
    let mut code = String::from("/* WARNING: Unknown calling convention */\n\n");
    for i in 0..functions {
        code.push_str(&format!(
            "undefined8 FUN_{:08x}(long param_1,int param_2)\n\n{{\n  int iVar1;\n  undefined8 uVar2;\n  \n  \
             iVar1 = param_2 * {i} + 7;\n  if (iVar1 < 0x10) {{\n    uVar2 = CONCAT44(iVar1,param_2);\n  }}\n  \
             else {{\n    uVar2 = *(undefined8 *)(param_1 + (long)iVar1 * 8);\n  }}\n  return uVar2;\n}}\n\n",
            0x101000 + i * 0x40
        ));
    }
    code.push_str("undefined8 main(int param_1,long param_2)\n\n{\n  FUN_00101000(param_2,param_1);\n  return 0;\n}\n");
    SourceUnit::new(code, Origin::Decompiler("ghidra".into()), UnitKind::Standalone).expect("non-empty")
}

/// Compiler-style output of roughly `lines` lines.
pub fn compiler_errors(lines: usize) -> Diagnostics {
    let text: String = (0..lines)
        .map(|i| format!("unit.c:{}:{}: error: unknown type name 'undefined{}'\n", i + 3, i % 17, i % 9))
        .collect();
    Diagnostics::tool(ConstraintLevel::L1, text)
}

/// `failing` failed cases, each with `lines` lines of output that differ
/// every third line.
pub fn test_failures(failing: usize, lines: usize) -> Diagnostics {
    let expected: String = (0..lines).map(|i| format!("row {i}: {}\n", i * i)).collect();
    let actual: String = (0..lines)
        .map(|i| if i % 3 == 0 { format!("row {i}: 0\n") } else { format!("row {i}: {}\n", i * i) })
        .collect();
    let failed = (0..failing)
        .map(|i| FailedTest {
            case: TestCase {
                args: vec![i.to_string()],
                stdin: Vec::new(),
                expected_stdout: expected.clone().into_bytes(),
                expected_exit: 0,
            },
            actual_stdout: actual.clone().into_bytes(),
            actual_exit: ProcessExit::Code(0),
        })
        .collect();
    Diagnostics::tests(failed)
}

/// A model reply wrapping `source` in prose and a fenced block.
pub fn fenced_reply(source: &SourceUnit) -> String {
    format!(
        "Here is the corrected program. I replaced the decompiler types.\n\n```c\n{}```\n\nThe helper now returns long.\n",
        source.code()
    )
}

/// `n` records spread over four optimization levels and two backends.
pub fn records(n: usize) -> Vec<CorpusRecord> {
    let levels = [ConstraintLevel::L1, ConstraintLevel::L2, ConstraintLevel::L3, ConstraintLevel::Pass];
    (0..n)
        .map(|i| {
            let final_ = levels[(i * 7 + 3) % 4];
            CorpusRecord {
                binary: binary_id(&i.to_le_bytes()),
                name: format!("b{i}"),
                backend: ["ghidra", "retdec"][i % 2].into(),
                opt_level: [OptLevel::O0, OptLevel::O1, OptLevel::O2, OptLevel::O3][i % 4],
                category: Some(["math", "string", "io"][i % 3].into()),
                status: if final_ == ConstraintLevel::Pass { RecordStatus::Success } else { RecordStatus::Failure },
                best_level_baseline: Some(levels[i % 4]),
                best_level_final: Some(final_),
                iterations_used: (i % 6) as u32,
                repairs_per_level: BTreeMap::new(),
                failure_class: None,
                first_pass_iteration: (final_ == ConstraintLevel::Pass).then_some((i % 5) as u32),
                levels: Vec::new(),
                repeated_sources: 0,
                error: None,
                tokens_in: 0,
                tokens_out: 0,
            }
        })
        .collect()
}
