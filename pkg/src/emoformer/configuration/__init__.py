from emoformer.configuration.argparse_compat import (
    SEED_ENVIRONMENT_VARIABLE,
    add_config_flag_to_parser,
    add_config_flags_group_to_parser,
    configuration_from_args,
    with_environment_overrides,
)
from emoformer.configuration.configurations import (
    GENERAL_CONFIG_SECTION,
    Configuration,
    DeclaredConfig,
    configuration_from_file,
    declare_configuration,
    default_configuration,
    get_declared_configuration,
    iterate_declared_configurations,
    print_configuration_file,
)
from emoformer.configuration.profile import available_profiles, configuration_from_profile
