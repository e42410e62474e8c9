#include "testmend/miner.hpp"

namespace testmend {

// 51 change types, grouped roughly as: statements, API surface, types and
// parameters, immutability, branches/conditions, exceptions, loops, logging,
// decorators, data structures, control flow, performance, configuration,
// return values.
ChangeTypeCatalog ChangeTypeCatalog::builtin() {
    ChangeTypeCatalog catalog;
    catalog.entries = {
        {"add-statement", "Add a new statement that changes the method's observable behavior."},
        {"delete-statement", "Delete one existing statement from the method body."},
        {"modify-statement", "Modify the expression computed by an existing statement."},
        {"reorder-statements", "Swap the order of two adjacent statements."},
        {"duplicate-call", "Invoke one of the existing method calls a second time."},
        {"alter-api-call", "Replace an API call with a related call on the same object."},
        {"alter-api-arguments", "Change the arguments passed to one API call."},
        {"add-api-call", "Add a call to another method available in the focal file."},
        {"remove-api-call", "Remove one of the API calls from the body."},
        {"change-variable-type", "Change a local variable to an equivalent but different type."},
        {"change-parameter-type", "Expect a different type for one parameter."},
        {"change-return-type", "Return a value of a different type."},
        {"rename-parameter", "Rename one parameter and every use of it."},
        {"add-parameter-default", "Add or change a default value of a parameter."},
        {"add-keyword-only-parameter", "Add a keyword-only parameter with a default that alters behavior."},
        {"make-parameter-immutable", "Stop mutating a parameter; operate on a copy instead."},
        {"freeze-return-value", "Return an immutable variant of the current result."},
        {"add-branch-empty-input", "Add a branch that returns early for empty input."},
        {"add-branch-special-value", "Add a branch keyed on one special input value."},
        {"invert-condition", "Invert an existing condition."},
        {"tighten-condition", "Strengthen an existing condition so it matches fewer cases."},
        {"relax-condition", "Weaken an existing condition so it matches more cases."},
        {"add-guard-raise", "Raise an exception when the input is invalid."},
        {"change-exception-type", "Raise a different exception type than before."},
        {"add-else-branch", "Add an else branch with behavior distinct from the if branch."},
        {"convert-loop", "Convert a loop into a comprehension or the other way round."},
        {"change-loop-bounds", "Change the loop's range, step, or chunk size."},
        {"add-loop-filter", "Skip some items inside the loop with a new condition."},
        {"early-loop-exit", "Break out of the loop early under a new condition."},
        {"add-logging", "Add a logging or print statement carrying a computed value."},
        {"remove-logging", "Remove an existing logging statement."},
        {"change-log-level", "Change a logging call's level or message content."},
        {"add-decorator", "Add a decorator to the method."},
        {"remove-decorator", "Remove one of the method's decorators."},
        {"change-decorator-arguments", "Change the arguments of an existing decorator."},
        {"change-data-structure", "Swap the underlying container (list, dict, set, tuple)."},
        {"change-dict-keys", "Rename keys in a dictionary the method builds or returns."},
        {"nest-result", "Wrap the result one level deeper in a container."},
        {"flatten-result", "Flatten one level of nesting out of the result."},
        {"reorder-control-flow", "Reorder if/elif/else arms without deleting any."},
        {"merge-branches", "Merge two branches into one shared code path."},
        {"split-branch", "Split one branch into two more specific branches."},
        {"add-early-return", "Return early under a condition that previously fell through."},
        {"memoize-result", "Cache and reuse results across calls."},
        {"batch-operations", "Process items in batches instead of one at a time."},
        {"short-circuit-evaluation", "Skip the expensive path when inputs allow it."},
        {"change-config-default", "Change a configuration default the method relies on."},
        {"read-config-parameter", "Make behavior depend on a new configuration parameter."},
        {"wrong-return-value", "Return a subtly wrong value for some inputs."},
        {"off-by-one-return", "Introduce an off-by-one error in the returned result."},
        {"swap-return-branches", "Swap the values returned by two different branches."},
    };
    return catalog;
}

} // namespace testmend
