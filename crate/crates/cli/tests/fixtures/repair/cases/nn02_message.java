package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void findZ() {
        Calc calc = new Calc();
        assertNotNull("z is stocked", calc.find("z"));
    }
}
