/* Smoke test for the C ABI. Build and run from the repository root:
 *
 *   cargo build -p storefleet-ffi
 *   cc -std=c99 -Wall -Wextra -Werror -I crates/ffi/include \
 *      crates/ffi/examples/smoke.c target/debug/libstorefleet_ffi.a -lm -o smoke
 *   ./smoke
 */
#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "storefleet.h"

int main(void) {
    double caps[5] = {100, 150, 200, 200, 250};
    SfStoreSpec specs[5];
    for (int i = 0; i < 5; i++) {
        specs[i].id = NULL;
        specs[i].capacity_mwh = caps[i];
        specs[i].max_discharge_mw = 100;
        specs[i].max_charge_mw = 0;
        specs[i].efficiency = 1.0;
    }
    SfFleet *fleet = NULL;
    assert(sf_fleet_new(specs, 5, &fleet) == SF_STATUS_OK);
    assert(sf_fleet_len(fleet) == 5);

    double times[4] = {0, 2, 3, 4};
    double values[3] = {200, 500, 100};
    SfSignal *signal = NULL;
    assert(sf_signal_new(times, 4, values, &signal) == SF_STATUS_OK);

    SfRunSummary summary;
    double finals[5];
    assert(sf_simulate(fleet, NULL, signal, SF_POLICY_GGDDF, finals, &summary) == SF_STATUS_OK);
    assert(fabs(summary.total_unserved_mwh - 100.0) < 1e-9);
    assert(summary.has_failure && fabs(summary.first_failure_time_h - 3.0) < 1e-9);
    for (int i = 0; i < 5; i++) assert(fabs(finals[i]) < 1e-9);

    double bound = -1;
    assert(sf_min_unserved(fleet, NULL, signal, false, &bound) == SF_STATUS_OK);
    assert(fabs(bound - 100.0) < 1e-7);

    SfFleet *bad = NULL;
    SfStoreSpec broken = {NULL, -1.0, 100, 0, 1.0};
    assert(sf_fleet_new(&broken, 1, &bad) == SF_STATUS_INVALID_FLEET);
    printf("expected error: %s\n", sf_last_error());

    sf_signal_free(signal);
    sf_fleet_free(fleet);
    printf("C ABI smoke test passed: unserved %.1f MWh, version %s\n",
           summary.total_unserved_mwh, sf_version());
    return 0;
}
