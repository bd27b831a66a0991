# statistical model packages
